use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::model::builtin::GeneratorParams;
use crate::spec::{compile_text, HalfspacePolytope, Region, RegionTable};

pub(crate) fn robot() -> (LtvSystem<f64>, TimedSets<f64>, Vec<f64>) {
    let sys = LtvSystem::time_invariant(Matrix::identity(2), Matrix::identity(2), 6).unwrap();
    let mut r = RegionTable::new();
    r.insert("R1".into(), Region::from_box(&[(-0.3, 0.3), (0.6, 1.25)]));
    r.insert("R2".into(), Region::from_box(&[(0.8, 1.5), (1.2, 1.75)]));
    r.insert("R3".into(), Region::from_box(&[(-1.0, 1.7), (0.0, 2.0)]));
    let sets = compile_text("next^2(R1) & always[4,6](R2) & always[0,6](R3)", &r, 2, 6).unwrap();
    (sys, sets, vec![0.0, 0.2])
}

fn generator() -> (LtvSystem<f64>, TimedSets<f64>, Vec<f64>) {
    let sys = GeneratorParams::default().system(30).unwrap();
    let mut r = RegionTable::new();
    r.insert(
        "R1".into(),
        Region::from_box(&[(-0.5, 0.5), (-0.1, 0.1), (-2.0, 2.0)]),
    );
    r.insert(
        "R2".into(),
        Region::from_box(&[(-2.0, 10.0), (-2.0, 10.0), (-5.0, 5.0)]),
    );
    let sets = compile_text("always[2,30](R1) & always[0,30](R2)", &r, 3, 30).unwrap();
    (sys, sets, vec![0.5, 0.0, 0.0])
}

/// `x⁺ = x + u + d` with `|x(k)| ≤ 1` for every step.
fn scalar_box(horizon: usize) -> (LtvSystem<f64>, TimedSets<f64>) {
    let sys = LtvSystem::time_invariant(Matrix::identity(1), Matrix::identity(1), horizon).unwrap();
    let mut r = RegionTable::new();
    r.insert("X".into(), Region::from_box(&[(-1.0, 1.0)]));
    let sets = compile_text(&format!("always[0,{horizon}](X)"), &r, 1, horizon).unwrap();
    (sys, sets)
}

fn satisfied(r: &MetricResult<f64>) -> bool {
    r.certificate.as_ref().is_some_and(|c| c.satisfied)
}

fn recheck(
    sys: &LtvSystem<f64>,
    sets: &TimedSets<f64>,
    x0: &[f64],
    r: &MetricResult<f64>,
    mu: f64,
    eps: Option<f64>,
) -> VertexCertificate<f64> {
    certify_vertices(sys, r.controller.as_ref().unwrap(), x0, mu, sets, eps).unwrap()
}

#[test]
fn scalar_resilience_without_input() {
    let (sys, sets) = scalar_box(1);
    let r = resilience_open(&sys, &sets, &[0.0], Some(0.0)).unwrap();
    assert!((r.value - 1.0).abs() < 1e-9, "{}", r.value);
    assert_eq!(r.status, Status::Feasible);
    assert!(satisfied(&r));
    assert!(!recheck(&sys, &sets, &[0.0], &r, 1.05, Some(0.0)).satisfied);
}

#[test]
fn scalar_reach_needs_unit_input() {
    let sys =
        LtvSystem::<f64>::time_invariant(Matrix::identity(1), Matrix::identity(1), 1).unwrap();
    let mut r = RegionTable::new();
    r.insert(
        "G".into(),
        Region::Polytope(
            HalfspacePolytope::new(Matrix::from_rows(&[vec![-1.0]]), vec![-1.0]).unwrap(),
        ),
    );
    let sets = compile_text("next(G)", &r, 1, 1).unwrap();
    let e = effort_open(&sys, &sets, &[0.0], 0.0).unwrap();
    assert!((e.value - 1.0).abs() < 1e-9, "{}", e.value);
    assert!(satisfied(&e));
    let c = effort_closed(&sys, &sets, &[0.0], 0.0, &SearchConfig::default()).unwrap();
    assert!((c.value - 1.0).abs() < 1e-6, "{}", c.value);
}

#[test]
fn vacuous_specification_is_unbounded() {
    let sys =
        LtvSystem::<f64>::time_invariant(Matrix::zeros(2, 2), Matrix::zeros(2, 1), 3).unwrap();
    let sets = compile_text("true", &RegionTable::new(), 2, 3).unwrap();
    let open = resilience_open(&sys, &sets, &[0.3, -0.1], Some(1.0)).unwrap();
    assert!(open.value.is_infinite() && open.status == Status::Feasible);
    let closed =
        resilience_closed(&sys, &sets, &[0.3, -0.1], None, &SearchConfig::default()).unwrap();
    assert!(closed.value.is_infinite() && closed.status == Status::Feasible);
    assert!(matches!(
        pareto_open(&sys, &sets, &[0.3, -0.1], 1.0, 0.0, None),
        Err(ExactError::Unbounded(_))
    ));
}

/// Brute-force grid over the scalar gain with the inner program at each point.
fn scalar_grid_best(sys: &LtvSystem<f64>, sets: &TimedSets<f64>, eps0: f64) -> (f64, f64) {
    let mut best = (f64::NEG_INFINITY, 0.0);
    for i in 0..=2000 {
        let a = -2.0 + 2.0 * i as f64 / 2000.0;
        let blocks =
            closed_loop_blocks(sys, sets, &[0.0], &Matrix::from_rows(&[vec![a]]), true).unwrap();
        if let InnerOutcome::Optimal(s) = solve_inner(
            &blocks,
            &InnerQuery::resilience(Some(eps0)),
            ReductionForm::L1,
        )
        .unwrap()
        {
            if s.mu > best.0 {
                best = (s.mu, a);
            }
        }
    }
    best
}

#[test]
fn scalar_deadbeat_gain() {
    let (sys, sets) = scalar_box(3);
    let r = resilience_closed(&sys, &sets, &[0.0], Some(1.0), &SearchConfig::default()).unwrap();
    let (grid_mu, grid_a) = scalar_grid_best(&sys, &sets, 1.0);
    assert!(
        (grid_mu - 1.0).abs() < 1e-9 && (grid_a + 1.0).abs() < 1e-9,
        "grid: {grid_mu} at {grid_a}"
    );
    assert!(
        r.value >= grid_mu - 1e-4 && r.value <= 1.0 + 1e-9,
        "{}",
        r.value
    );
    let Some(Controller::Linear(lf)) = &r.controller else {
        panic!("expected linear feedback")
    };
    assert!((lf.alpha1[(0, 0)] + 1.0).abs() < 1e-3, "{:?}", lf.alpha1);
    assert!(satisfied(&r));
    assert!(!recheck(&sys, &sets, &[0.0], &r, 1.05 * r.value, Some(1.0)).satisfied);
}

#[test]
fn zero_effort_when_free_run_satisfies() {
    let (sys, sets) = scalar_box(3);
    let open = effort_open(&sys, &sets, &[0.2], 0.0).unwrap();
    assert_eq!(open.value, 0.0);
    let closed = effort_closed(&sys, &sets, &[0.2], 0.0, &SearchConfig::default()).unwrap();
    assert!(closed.value.abs() < 1e-12, "{}", closed.value);
    assert!(satisfied(&closed));
}

#[test]
fn nominal_infeasible_reports_zero_without_controller() {
    let (sys, sets) = scalar_box(1);
    // Starting outside the box can never be repaired at step 0.
    let r = resilience_open(&sys, &sets, &[2.0], Some(1.0)).unwrap();
    assert_eq!((r.status, r.value), (Status::NominalInfeasible, 0.0));
    assert!(r.controller.is_none());
    let e = effort_open(&sys, &sets, &[2.0], 0.1).unwrap();
    assert_eq!((e.status, e.value), (Status::NominalInfeasible, 0.0));
    let c = resilience_closed(
        &sys,
        &sets,
        &[2.0],
        Some(1.0),
        &SearchConfig {
            restarts: 2,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(c.status, Status::NominalInfeasible);
    assert!(c.search.is_some());
}

#[test]
fn effort_beyond_resilience_is_an_error() {
    let (sys, sets) = scalar_box(1);
    let g = resilience_open(&sys, &sets, &[0.0], None).unwrap();
    assert!((g.value - 1.0).abs() < 1e-9);
    assert!(matches!(
        effort_open(&sys, &sets, &[0.0], 1.5),
        Err(ExactError::InfeasibleAtMu0 { .. })
    ));
    assert!(matches!(
        effort_open(&sys, &sets, &[0.0], -1.0),
        Err(ExactError::Invalid(_))
    ));
}

#[test]
fn robot_open_loop_values() {
    let (sys, sets, x0) = robot();
    let g = resilience_open(&sys, &sets, &x0, None).unwrap();
    assert!((g.value - 0.0458).abs() <= 0.002, "{}", g.value);
    let e0 = effort_open(&sys, &sets, &x0, 0.0).unwrap();
    assert!((e0.value - 0.25).abs() <= 0.01, "{}", e0.value);
    let eg = effort_open(&sys, &sets, &x0, g.value).unwrap();
    assert!((eg.value - 0.39).abs() <= 0.01, "{}", eg.value);
    for r in [&g, &e0, &eg] {
        assert!(satisfied(r));
    }
    assert!(!recheck(&sys, &sets, &x0, &g, 1.05 * g.value, None).satisfied);
}

#[test]
fn generator_open_loop_values() {
    let (sys, sets, x0) = generator();
    let g = resilience_open(&sys, &sets, &x0, Some(0.397)).unwrap();
    assert!((g.value - 0.0031).abs() <= 0.0005, "{}", g.value);
    let eg = effort_open(&sys, &sets, &x0, 0.0031).unwrap();
    assert!((eg.value - 0.397).abs() <= 0.005, "{}", eg.value);
    let e0 = effort_open(&sys, &sets, &x0, 0.0).unwrap();
    assert!((e0.value - 0.367).abs() <= 0.005, "{}", e0.value);
    // n·N = 90: only the nominal trajectory can be enumerated.
    assert!(g.certificate.is_none());
    assert!(satisfied(&e0));
}

#[test]
fn open_loop_monotonicity() {
    for (sys, sets, x0) in [robot(), generator()] {
        let mut last = 0.0;
        for eps0 in [0.37, 0.4, 0.5, 1.0, 2.0, 5.0] {
            let g = resilience_open(&sys, &sets, &x0, Some(eps0)).unwrap().value;
            assert!(g >= last - 1e-12, "resilience dropped to {g} at {eps0}");
            last = g;
        }
        let cap = resilience_open(&sys, &sets, &x0, None).unwrap().value;
        let mut last = 0.0;
        for f in [0.0, 0.2, 0.4, 0.6, 0.8, 1.0] {
            let e = effort_open(&sys, &sets, &x0, f * cap).unwrap().value;
            assert!(e >= last - 1e-12, "effort dropped to {e} at {}", f * cap);
            last = e;
        }
    }
}

#[test]
fn open_loop_weight_degeneration() {
    let (sys, sets, x0) = robot();
    for eps0 in [0.3, 0.39, 1.0] {
        let g = resilience_open(&sys, &sets, &x0, Some(eps0)).unwrap();
        let p = pareto_open(&sys, &sets, &x0, 1.0, 0.0, Some(eps0))
            .unwrap()
            .unwrap();
        assert!((g.value - p.mu).abs() <= 1e-6, "{} vs {}", g.value, p.mu);
    }
    let blocks = open_loop_blocks(&sys, &sets, &x0).unwrap();
    for mu0 in [0.0, 0.02, 0.04] {
        let e = effort_open(&sys, &sets, &x0, mu0).unwrap();
        let q = InnerQuery {
            w1: 0.0,
            w2: 1.0,
            mu: MuSpec::Fixed(mu0),
            eps: EpsSpec::Variable { cap: None },
        };
        let InnerOutcome::Optimal(s) = solve_inner(&blocks, &q, ReductionForm::L1).unwrap() else {
            panic!()
        };
        assert!((e.value - s.eps).abs() <= 1e-6);
    }
}

#[test]
fn closed_loop_weight_degeneration() {
    let (sys, sets) = scalar_box(3);
    let cfg = SearchConfig::default();
    let r = resilience_closed(&sys, &sets, &[0.0], Some(0.6), &cfg).unwrap();
    let p = pareto_closed(&sys, &sets, &[0.0], 1.0, 0.0, Some(0.6), &cfg)
        .unwrap()
        .unwrap();
    assert!((r.value - p.mu).abs() <= 1e-6, "{} vs {}", r.value, p.mu);
}

#[test]
fn robot_frontier_is_monotone_with_known_endpoints() {
    let (sys, sets, x0) = robot();
    let weights: Vec<(f64, f64)> = (0..=20)
        .map(|i| (1.0, 0.02 * i as f64))
        .chain([(0.0, 1.0)])
        .collect();
    let pts = pareto_sweep(&sys, &sets, &x0, &weights, &SweepMode::Open, Some(0.39)).unwrap();
    let mut sorted = pts.clone();
    sorted.sort_by(|a, b| a.eps.total_cmp(&b.eps));
    for w in sorted.windows(2) {
        assert!(
            w[1].mu >= w[0].mu - 1e-9,
            "{:?} then {:?}",
            (w[0].eps, w[0].mu),
            (w[1].eps, w[1].mu)
        );
    }
    let (lo, hi) = (sorted.first().unwrap(), sorted.last().unwrap());
    assert!(
        (lo.eps - 0.25).abs() <= 0.01 && lo.mu.abs() < 1e-9,
        "{:?}",
        (lo.eps, lo.mu)
    );
    assert!(
        (hi.eps - 0.39).abs() <= 0.01 && (hi.mu - 0.0458).abs() <= 0.002,
        "{:?}",
        (hi.eps, hi.mu)
    );
    // Coalescing leaves distinct points only.
    for (i, a) in pts.iter().enumerate() {
        for b in &pts[..i] {
            assert!((a.mu - b.mu).abs() > 1e-9 || (a.eps - b.eps).abs() > 1e-9);
        }
    }
}

#[test]
fn closed_loop_frontier_ratio_monotone() {
    let (sys, sets) = scalar_box(2);
    let cfg = SearchConfig {
        restarts: 2,
        ..Default::default()
    };
    let weights = [(1.0, 2.0), (1.0, 1.0), (1.0, 0.5), (1.0, 0.1)];
    let pts = pareto_sweep(
        &sys,
        &sets,
        &[0.5],
        &weights,
        &SweepMode::Closed(cfg),
        Some(2.0),
    )
    .unwrap();
    for w in pts.windows(2) {
        assert!(w[1].mu >= w[0].mu - 1e-6, "{} then {}", w[0].mu, w[1].mu);
    }
}

#[test]
fn multiplier_and_l1_forms_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut compared = 0;
    for _ in 0..30 {
        let sys = crate::farkas::tests::random_system(&mut rng, 2, 1, 3);
        let sets = crate::farkas::tests::random_box_spec(&mut rng, 2, 3);
        let x0: Vec<f64> = (0..2).map(|_| rng.gen_range(-0.4..0.4)).collect();
        let blocks = open_loop_blocks(&sys, &sets, &x0).unwrap();
        let q = InnerQuery::pareto(1.0, 0.1, None);
        let a = solve_inner(&blocks, &q, ReductionForm::L1).unwrap();
        let b = solve_inner(&blocks, &q, ReductionForm::Multiplier).unwrap();
        match (a, b) {
            (InnerOutcome::Optimal(a), InnerOutcome::Optimal(b)) => {
                assert!(
                    (a.objective - b.objective).abs() <= 1e-7,
                    "{} vs {}",
                    a.objective,
                    b.objective
                );
                compared += 1;
            }
            (a, b) => assert_eq!(std::mem::discriminant(&a), std::mem::discriminant(&b)),
        }
    }
    assert!(compared >= 10);
}

#[test]
fn exact_queries_are_deterministic() {
    let (sys, sets, x0) = robot();
    let a = serde_json::to_string(&resilience_open(&sys, &sets, &x0, None).unwrap()).unwrap();
    let b = serde_json::to_string(&resilience_open(&sys, &sets, &x0, None).unwrap()).unwrap();
    assert_eq!(a, b);
    let (sys, sets) = scalar_box(2);
    let cfg = SearchConfig {
        restarts: 3,
        seed: 11,
        ..Default::default()
    };
    let a = resilience_closed(&sys, &sets, &[0.1], Some(0.7), &cfg).unwrap();
    let b = resilience_closed(&sys, &sets, &[0.1], Some(0.7), &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn f32_open_loop() {
    let sys =
        LtvSystem::<f32>::time_invariant(Matrix::identity(1), Matrix::identity(1), 1).unwrap();
    let mut r = RegionTable::new();
    r.insert("X".into(), Region::from_box(&[(-1.0f32, 1.0)]));
    let sets = compile_text("always[0,1](X)", &r, 1, 1).unwrap();
    let g = resilience_open(&sys, &sets, &[0.0f32], Some(0.0)).unwrap();
    assert!((g.value - 1.0).abs() < 1e-4);
}
