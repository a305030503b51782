//! Acceptance suite. One line per criterion; the process fails if any line fails.

use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use resilience_cli::problem::{bundled, Instance, ProblemFile};
use resilience_core::exact::{
    effort_closed, effort_open, pareto_closed, resilience_closed, resilience_open, solve_inner,
    EpsSpec, InnerOutcome, InnerQuery, MetricResult, MuSpec, ReductionForm, SearchConfig, Status,
};
use resilience_core::farkas::{certify_vertices, closed_loop_blocks, open_loop_blocks};
use resilience_core::model::Dynamics;
use resilience_core::scenario::{
    empirical_violation, risk_bound, sample_disturbances, solve_scenario, support_count,
    Distribution, ScenarioConfig, ScenarioObjective, Template, WarmStart,
};
use resilience_core::spec::{
    compile_text, margin_states, HalfspacePolytope, Norm, NormBall, Region, RegionTable,
};
use resilience_core::Controller;
use resilience_core::{LtvSystem, Matrix, TimedSets};

const RISK_TOL: f64 = 1e-3;
const RISK_BUDGET: Duration = Duration::from_secs(1);
const LP_BUDGET: Duration = Duration::from_secs(60);
const GEN_RESILIENCE: (f64, f64) = (0.0031, 0.0005);
const GEN_EFFORT_AT_G: (f64, f64) = (0.397, 0.005);
const GEN_EFFORT_AT_ZERO: (f64, f64) = (0.367, 0.005);
const ROBOT_OPEN_RESILIENCE: (f64, f64) = (0.0458, 0.002);
const ROBOT_EFFORT_AT_ZERO: (f64, f64) = (0.25, 0.01);
const ROBOT_OPEN_EFFORT_AT_G: (f64, f64) = (0.39, 0.01);
const ROBOT_CLOSED_RESILIENCE_MIN: f64 = 0.065;
const ROBOT_CLOSED_EFFORT_AT_G: f64 = 1.001;
const ROBOT_CLOSED_EFFORT_REL: f64 = 0.05;
const ROBOT_PARETO_WEIGHTS: (f64, f64) = (0.5, 0.05);
const ROBOT_PARETO_POINT: (f64, f64) = (0.053, 0.559);
const ROBOT_PARETO_REL: f64 = 0.10;
const MAXIMALITY_INSTANCES: usize = 20;
const OVERSHOOT: f64 = 1.05;
const UNDERSHOOT: f64 = 0.95;
const FARKAS_INSTANCES: usize = 50;
const FARKAS_TOL: f64 = 1e-7;
const CONSERVATISM_SAMPLES: [usize; 3] = [10, 100, 1000];
const CONSERVATISM_SEEDS: u64 = 20;
const ACC_SAMPLES: usize = 100;
const ACC_FRESH: usize = 10_000;
const ACC_BETA: f64 = 1e-2;
const SPEC_CASES: usize = 200;
const SPEC_MAX_HORIZON: usize = 6;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn within(v: f64, (target, tol): (f64, f64)) -> bool {
    (v - target).abs() <= tol
}

fn within_rel(v: f64, target: f64, rel: f64) -> bool {
    (v - target).abs() <= rel * target.abs()
}

fn load(name: &str) -> (ProblemFile, Instance) {
    let p = bundled(name).expect("bundled problem parses");
    let inst = p.instance().expect("bundled problem is valid");
    (p, inst)
}

fn certified(r: &MetricResult<f64>) -> bool {
    r.certificate.as_ref().is_some_and(|c| c.satisfied)
}

fn risk_table() -> Verdict {
    let table = [
        (10, 4, [0.851, 0.936, 0.971]),
        (100, 8, [0.202, 0.259, 0.307]),
        (500, 9, [0.046, 0.059, 0.072]),
    ];
    let start = Instant::now();
    let mut worst = 0.0f64;
    for (m, k, expected) in table {
        for (beta, want) in [1e-2, 1e-4, 1e-6].into_iter().zip(expected) {
            let b = risk_bound(k, m, beta).unwrap();
            worst = worst.max((b - want).abs());
        }
    }
    let elapsed = start.elapsed();
    Verdict::new(
        worst <= RISK_TOL && elapsed < RISK_BUDGET,
        format!(
            "max deviation {worst:.2e} (tol {RISK_TOL}), {elapsed:.2?} (budget {RISK_BUDGET:?})"
        ),
    )
}

fn generator() -> Verdict {
    let (p, inst) = load("generator");
    let sys = inst.ltv().unwrap();
    let timed = |f: &dyn Fn() -> MetricResult<f64>| {
        let t = Instant::now();
        let r = f();
        (r, t.elapsed())
    };
    let (g, tg) = timed(&|| resilience_open(sys, &inst.sets, &inst.x0, p.query.eps0).unwrap());
    let (e_g, te_g) = timed(&|| effort_open(sys, &inst.sets, &inst.x0, g.value).unwrap());
    let (e_0, te_0) = timed(&|| effort_open(sys, &inst.sets, &inst.x0, 0.0).unwrap());
    let slowest = tg.max(te_g).max(te_0);
    Verdict::new(
        within(g.value, GEN_RESILIENCE)
            && within(e_g.value, GEN_EFFORT_AT_G)
            && within(e_0.value, GEN_EFFORT_AT_ZERO)
            && slowest < LP_BUDGET,
        format!(
            "resilience {:.5}, effort(g) {:.4}, effort(0) {:.4}, slowest {slowest:.2?}",
            g.value, e_g.value, e_0.value
        ),
    )
}

fn robot_open() -> Verdict {
    let (_, inst) = load("robot_open");
    let sys = inst.ltv().unwrap();
    let g = resilience_open(sys, &inst.sets, &inst.x0, None).unwrap();
    let e_0 = effort_open(sys, &inst.sets, &inst.x0, 0.0).unwrap();
    let e_g = effort_open(sys, &inst.sets, &inst.x0, g.value).unwrap();
    Verdict::new(
        within(g.value, ROBOT_OPEN_RESILIENCE)
            && within(e_0.value, ROBOT_EFFORT_AT_ZERO)
            && within(e_g.value, ROBOT_OPEN_EFFORT_AT_G),
        format!(
            "resilience {:.5}, effort(0) {:.4}, effort(g) {:.4}",
            g.value, e_0.value, e_g.value
        ),
    )
}

fn gain_of(r: &MetricResult<f64>) -> Vec<f64> {
    match &r.controller {
        Some(Controller::Linear(lf)) => (0..lf.alpha1.rows())
            .flat_map(|i| lf.alpha1.row(i).to_vec())
            .collect(),
        _ => Vec::new(),
    }
}

fn robot_closed() -> Verdict {
    let (p, inst) = load("robot_closed");
    let sys = inst.ltv().unwrap();
    let cfg = p.search_config();
    let g = resilience_closed(sys, &inst.sets, &inst.x0, None, &cfg).unwrap();
    let e_0 = effort_closed(sys, &inst.sets, &inst.x0, 0.0, &cfg).unwrap();
    let warm = SearchConfig {
        warm_starts: vec![gain_of(&g)],
        ..cfg.clone()
    };
    let e_g = effort_closed(sys, &inst.sets, &inst.x0, g.value, &warm).unwrap();
    let (w1, w2) = ROBOT_PARETO_WEIGHTS;
    let pt = pareto_closed(sys, &inst.sets, &inst.x0, w1, w2, None, &cfg).unwrap();
    let (mu, eps) = pt.as_ref().map_or((f64::NAN, f64::NAN), |p| (p.mu, p.eps));
    Verdict::new(
        g.value >= ROBOT_CLOSED_RESILIENCE_MIN
            && certified(&g)
            && within(e_0.value, ROBOT_EFFORT_AT_ZERO)
            && within_rel(e_g.value, ROBOT_CLOSED_EFFORT_AT_G, ROBOT_CLOSED_EFFORT_REL)
            && within_rel(mu, ROBOT_PARETO_POINT.0, ROBOT_PARETO_REL)
            && within_rel(eps, ROBOT_PARETO_POINT.1, ROBOT_PARETO_REL),
        format!(
            "resilience {:.5} (certified {}), effort(0) {:.4}, effort(g) {:.4}, trade-off ({mu:.4}, {eps:.4})",
            g.value,
            certified(&g),
            e_0.value,
            e_g.value
        ),
    )
}

struct Random {
    sys: LtvSystem,
    sets: TimedSets,
    x0: Vec<f64>,
}

fn random_instance(rng: &mut ChaCha8Rng) -> Random {
    let n = rng.gen_range(1..=2);
    let m = rng.gen_range(1..=2);
    let horizon = rng.gen_range(1..=4);
    let a = (0..horizon)
        .map(|_| Matrix::from_fn(n, n, |_, _| rng.gen_range(-1.2..1.2)))
        .collect();
    let b = (0..horizon)
        .map(|_| Matrix::from_fn(n, m, |_, _| rng.gen_range(-1.0..1.0)))
        .collect();
    let polys = (0..=horizon)
        .map(|_| {
            let iv: Vec<(f64, f64)> = (0..n)
                .map(|_| (-rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0)))
                .collect();
            let p = HalfspacePolytope::from_box(&iv);
            (p.g, p.h)
        })
        .collect();
    Random {
        sys: LtvSystem::new(a, b).unwrap(),
        sets: TimedSets::from_polytopes(polys).unwrap(),
        x0: (0..n).map(|_| rng.gen_range(-0.4..0.4)).collect(),
    }
}

fn vertex_ok(r: &Random, c: &Controller, mu: f64, eps: Option<f64>) -> bool {
    certify_vertices(&r.sys, c, &r.x0, mu, &r.sets, eps)
        .unwrap()
        .satisfied
}

fn maximality() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let cfg = SearchConfig {
        restarts: 2,
        ..Default::default()
    };
    let (mut open_res, mut closed_res, mut open_eff, mut failures) = (0, 0, 0, 0);
    while open_res < MAXIMALITY_INSTANCES
        || closed_res < MAXIMALITY_INSTANCES
        || open_eff < MAXIMALITY_INSTANCES
    {
        let inst = random_instance(&mut rng);
        let eps0 = rng.gen_range(0.5..2.0);
        let usable = |r: &MetricResult<f64>| {
            r.status == Status::Feasible && r.value.is_finite() && r.value > 1e-9
        };
        if open_res < MAXIMALITY_INSTANCES {
            let r = resilience_open(&inst.sys, &inst.sets, &inst.x0, Some(eps0)).unwrap();
            if usable(&r) {
                let c = r.controller.as_ref().unwrap();
                let ok = vertex_ok(&inst, c, r.value, Some(eps0))
                    && !vertex_ok(&inst, c, OVERSHOOT * r.value, Some(eps0));
                failures += usize::from(!ok);
                open_res += 1;
            }
        }
        if closed_res < MAXIMALITY_INSTANCES {
            let r = resilience_closed(&inst.sys, &inst.sets, &inst.x0, Some(eps0), &cfg).unwrap();
            if usable(&r) {
                let c = r.controller.as_ref().unwrap();
                let ok = vertex_ok(&inst, c, r.value, Some(eps0))
                    && !vertex_ok(&inst, c, OVERSHOOT * r.value, Some(eps0));
                failures += usize::from(!ok);
                closed_res += 1;
            }
        }
        if open_eff < MAXIMALITY_INSTANCES {
            let g = resilience_open(&inst.sys, &inst.sets, &inst.x0, None).unwrap();
            if g.status == Status::Feasible && g.value.is_finite() {
                let mu0 = rng.gen_range(0.0..1.0) * g.value;
                let e = effort_open(&inst.sys, &inst.sets, &inst.x0, mu0).unwrap();
                if e.value > 1e-9 {
                    let blocks = open_loop_blocks(&inst.sys, &inst.sets, &inst.x0).unwrap();
                    let q = InnerQuery {
                        w1: 0.0,
                        w2: 1.0,
                        mu: MuSpec::Fixed(mu0),
                        eps: EpsSpec::Fixed(UNDERSHOOT * e.value),
                    };
                    let ok = vertex_ok(&inst, e.controller.as_ref().unwrap(), mu0, Some(e.value))
                        && solve_inner(&blocks, &q, ReductionForm::L1).unwrap()
                            == InnerOutcome::Infeasible;
                    failures += usize::from(!ok);
                    open_eff += 1;
                }
            }
        }
    }
    Verdict::new(
        failures == 0,
        format!(
            "{open_res} open-loop and {closed_res} closed-loop resilience, {open_eff} open-loop effort instances; {failures} failures"
        ),
    )
}

fn farkas_equivalence() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    let (mut compared, mut worst, mut mismatched) = (0, 0.0f64, 0);
    while compared < FARKAS_INSTANCES {
        let inst = random_instance(&mut rng);
        let (w1, w2) = (rng.gen_range(0.1..1.0), rng.gen_range(0.01..1.0));
        let blocks = if rng.gen_bool(0.5) {
            open_loop_blocks(&inst.sys, &inst.sets, &inst.x0).unwrap()
        } else {
            let gain = Matrix::from_fn(inst.sys.b(0).cols(), inst.x0.len(), |_, _| {
                rng.gen_range(-0.8..0.8)
            });
            closed_loop_blocks(&inst.sys, &inst.sets, &inst.x0, &gain, true).unwrap()
        };
        let q = InnerQuery::pareto(w1, w2, None);
        match (
            solve_inner(&blocks, &q, ReductionForm::L1).unwrap(),
            solve_inner(&blocks, &q, ReductionForm::Multiplier).unwrap(),
        ) {
            (InnerOutcome::Optimal(a), InnerOutcome::Optimal(b)) => {
                worst = worst.max((a.objective - b.objective).abs());
                compared += 1;
            }
            (a, b) if std::mem::discriminant(&a) == std::mem::discriminant(&b) => {}
            _ => mismatched += 1,
        }
    }
    Verdict::new(
        worst <= FARKAS_TOL && mismatched == 0,
        format!("{compared} optimal pairs, max gap {worst:.2e} (tol {FARKAS_TOL:.0e}), {mismatched} status mismatches"),
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

fn conservatism() -> Verdict {
    let (p, inst) = load("robot_closed");
    let sys = inst.ltv().unwrap();
    let exact = resilience_closed(sys, &inst.sets, &inst.x0, None, &p.search_config()).unwrap();
    let Some(Controller::Linear(lf)) = &exact.controller else {
        return Verdict::new(false, "exact search returned no linear controller");
    };
    let mut alpha = gain_of(&exact);
    alpha.extend(&lf.alpha2);
    let cfg = ScenarioConfig {
        restarts: 0,
        warm_starts: vec![WarmStart {
            mu: exact.value,
            alpha,
        }],
        ..Default::default()
    };
    let (n, horizon) = (inst.x0.len(), sys.horizon());
    let mut below = 0;
    let mut medians = Vec::new();
    for m in CONSERVATISM_SAMPLES {
        let gaps: Vec<f64> = (0..CONSERVATISM_SEEDS)
            .map(|seed| {
                let scen =
                    sample_disturbances::<f64>(m, horizon, n, seed, Distribution::Uniform).unwrap();
                let cert = solve_scenario(
                    sys,
                    &inst.sets,
                    &inst.x0,
                    Template::Linear,
                    &scen,
                    ScenarioObjective::resilience(None),
                    &cfg,
                )
                .unwrap();
                below += usize::from(cert.mu < exact.value);
                cert.mu - exact.value
            })
            .collect();
        medians.push(median(gaps));
    }
    let shrinking = medians.windows(2).all(|w| w[1] < w[0]);
    let robot_ok = below == 0 && shrinking;

    let (p, inst) = load("acc_linear");
    let sb = &p.query.scenario;
    let cfg = p.scenario_config();
    let scen =
        sample_disturbances::<f64>(ACC_SAMPLES, p.horizon, 2, sb.seed, sb.distribution).unwrap();
    let objective = ScenarioObjective::resilience(p.query.eps0);
    let mut cert = solve_scenario(
        &inst.plant,
        &inst.sets,
        &inst.x0,
        Template::Linear,
        &scen,
        objective,
        &cfg,
    )
    .unwrap();
    let s = support_count(&cert, &inst.plant, &inst.sets, &inst.x0, &scen, &cfg).unwrap();
    let bound = risk_bound(s, ACC_SAMPLES, ACC_BETA).unwrap();
    cert.support = Some(s);
    let fresh = sample_disturbances::<f64>(ACC_FRESH, p.horizon, 2, sb.fresh_seed, sb.distribution)
        .unwrap();
    let rate = empirical_violation(&cert, &inst.plant, &inst.sets, &inst.x0, &fresh).unwrap();
    let acc_ok = cert.mu > 0.0 && s <= ACC_SAMPLES && rate <= bound;
    Verdict::new(
        robot_ok && acc_ok,
        format!(
            "robot exact {:.5}, median gaps {:?}, {below} below exact; ACC mu {:.4}, support {s}/{ACC_SAMPLES}, violation {rate:.4} <= bound {bound:.4}",
            exact.value,
            medians.iter().map(|g| format!("{g:.4}")).collect::<Vec<_>>(),
            cert.mu
        ),
    )
}

#[derive(Clone, Debug)]
enum Shape {
    Box(Vec<(f64, f64)>),
    Ball {
        center: Vec<f64>,
        radius: f64,
        euclidean: bool,
    },
    Exterior {
        center: Vec<f64>,
        radius: f64,
    },
}

impl Shape {
    fn random(rng: &mut ChaCha8Rng, n: usize) -> Self {
        match rng.gen_range(0..3) {
            0 => Shape::Box(
                (0..n)
                    .map(|_| {
                        let lo = rng.gen_range(-1.5..0.5);
                        (lo, lo + rng.gen_range(0.2..2.5))
                    })
                    .collect(),
            ),
            1 => Shape::Ball {
                center: (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                radius: rng.gen_range(0.3..1.8),
                euclidean: rng.gen_bool(0.5),
            },
            _ => Shape::Exterior {
                center: (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                radius: rng.gen_range(0.1..1.2),
            },
        }
    }

    fn contains(&self, x: &[f64]) -> bool {
        let dist = |c: &[f64]| {
            c.iter()
                .zip(x)
                .map(|(c, v)| (v - c) * (v - c))
                .sum::<f64>()
                .sqrt()
        };
        match self {
            Shape::Box(iv) => iv.iter().zip(x).all(|((lo, hi), v)| lo <= v && v <= hi),
            Shape::Ball {
                center,
                radius,
                euclidean: true,
            } => dist(center) <= *radius,
            Shape::Ball {
                center,
                radius,
                euclidean: false,
            } => center.iter().zip(x).all(|(c, v)| (v - c).abs() <= *radius),
            Shape::Exterior { center, radius } => dist(center) >= *radius,
        }
    }

    fn region(&self) -> Region<f64> {
        match self {
            Shape::Box(iv) => Region::from_box(iv),
            Shape::Ball {
                center,
                radius,
                euclidean,
            } => {
                let norm = if *euclidean {
                    Norm::Euclidean
                } else {
                    Norm::Infinity
                };
                Region::Ball(NormBall::new(center.clone(), *radius, norm))
            }
            Shape::Exterior { center, radius } => {
                Region::Exterior(NormBall::new(center.clone(), *radius, Norm::Euclidean))
            }
        }
    }
}

enum Atom {
    Next(usize),
    Always(usize, usize),
    Eventually(usize, usize),
}

fn spec_compiler() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut mismatches = 0;
    for _ in 0..SPEC_CASES {
        let n = rng.gen_range(1..=3);
        let horizon = rng.gen_range(1..=SPEC_MAX_HORIZON);
        let shapes: Vec<Shape> = (0..rng.gen_range(1..=3))
            .map(|_| Shape::random(&mut rng, n))
            .collect();
        let table: RegionTable<f64> = shapes
            .iter()
            .enumerate()
            .map(|(i, s)| (format!("R{i}"), s.region()))
            .collect();
        let atoms: Vec<(Atom, usize)> = (0..rng.gen_range(1..=4))
            .map(|_| {
                let (a, b) = (rng.gen_range(0..=horizon), rng.gen_range(0..=horizon));
                let (lo, hi) = (a.min(b), a.max(b));
                let atom = match rng.gen_range(0..3) {
                    0 => Atom::Next(a),
                    1 => Atom::Always(lo, hi),
                    _ => Atom::Eventually(lo, hi),
                };
                (atom, rng.gen_range(0..shapes.len()))
            })
            .collect();
        let states: Vec<Vec<f64>> = (0..=horizon)
            .map(|_| (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let text = atoms
            .iter()
            .map(|(a, r)| match a {
                Atom::Next(k) => format!("next^{k}(R{r})"),
                Atom::Always(lo, hi) => format!("always[{lo},{hi}](R{r})"),
                Atom::Eventually(lo, hi) => format!("eventually[{lo},{hi}](R{r})"),
            })
            .collect::<Vec<_>>()
            .join(" & ");
        let direct = atoms.iter().all(|(a, r)| {
            let inside = |k: usize| shapes[*r].contains(&states[k]);
            match a {
                Atom::Next(k) => inside(*k),
                Atom::Always(lo, hi) => (*lo..=*hi).all(inside),
                Atom::Eventually(lo, hi) => (*lo..=*hi).any(inside),
            }
        });
        let sets = compile_text(&text, &table, n, horizon).unwrap();
        let m = margin_states(&states, &sets).unwrap();
        mismatches += usize::from((m >= 0.0) != direct);
    }

    let (p, inst) = load("robot_open");
    let sets = &inst.sets;
    let rows = sets.row_counts();
    let region = |name: &str| match p.regions[name].clone() {
        resilience_cli::problem::RegionSpec::Box { bounds, .. } => HalfspacePolytope::from_box(
            &bounds.iter().map(|[lo, hi]| (*lo, *hi)).collect::<Vec<_>>(),
        ),
        _ => unreachable!("robot regions are boxes"),
    };
    let (r1, r2, r3) = (region("R1"), region("R2"), region("R3"));
    let stacked = |k: usize, parts: &[&HalfspacePolytope<f64>]| {
        let (g, h) = sets.polytope(k);
        let mut want_g = parts[0].g.clone();
        let mut want_h = parts[0].h.clone();
        for q in &parts[1..] {
            want_g = want_g.vstack(&q.g);
            want_h.extend(&q.h);
        }
        g == &want_g && h == want_h.as_slice()
    };
    let layout = sets.polytopic
        && rows == vec![4, 4, 8, 4, 8, 8, 8]
        && stacked(0, &[&r3])
        && stacked(2, &[&r1, &r3])
        && (4..=6).all(|k| stacked(k, &[&r2, &r3]));
    Verdict::new(
        mismatches == 0 && layout,
        format!("{mismatches} sign mismatches in {SPEC_CASES} pairs; robot rows per step {rows:?}"),
    )
}

fn run_cli(args: &[&str]) -> (Vec<u8>, i32) {
    let out = Command::new(env!("CARGO_BIN_EXE_resil"))
        .args(args)
        .arg("--quiet")
        .output()
        .expect("binary runs");
    (out.stdout, out.status.code().unwrap_or(-1))
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let mut runs: Vec<(String, Vec<String>)> = Vec::new();
    for name in ["robot_open", "robot_closed", "generator"] {
        for cmd in ["resilience", "effort"] {
            runs.push((
                format!("{cmd} {name}"),
                vec![cmd.into(), "--problem".into(), format!("bundled:{name}")],
            ));
        }
    }
    let mut pareto = bundled("robot_open").unwrap();
    pareto.query.weight_grid = vec![[1.0, 0.0], [0.5, 0.05], [0.5, 0.5], [0.0, 1.0]];
    let path = dir.path().join("pareto.toml");
    std::fs::write(&path, pareto.to_toml()).unwrap();
    runs.push((
        "pareto robot_open".into(),
        vec![
            "pareto".into(),
            "--problem".into(),
            path.display().to_string(),
        ],
    ));
    runs.push((
        "scenario acc_linear".into(),
        vec![
            "scenario".into(),
            "--problem".into(),
            "bundled:acc_linear".into(),
            "--seed".into(),
            "7".into(),
        ],
    ));
    for name in ["acc_poly", "collision"] {
        let mut p = bundled(name).unwrap();
        p.query.scenario.skip_support = true;
        let path = dir.path().join(format!("{name}.toml"));
        std::fs::write(&path, p.to_toml()).unwrap();
        runs.push((
            format!("scenario {name}"),
            vec![
                "scenario".into(),
                "--problem".into(),
                path.display().to_string(),
                "--seed".into(),
                "7".into(),
            ],
        ));
    }
    let mut differing = Vec::new();
    for (label, args) in &runs {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let (a, ca) = run_cli(&args);
        let (b, cb) = run_cli(&args);
        if a != b || ca != cb || a.is_empty() {
            differing.push(label.clone());
        }
    }
    Verdict::new(
        differing.is_empty(),
        format!("{} queries run twice; differing: {differing:?}", runs.len()),
    )
}

fn main() {
    type Check = fn() -> Verdict;
    let criteria: [(&str, Check); 9] = [
        ("risk-bound table", risk_table),
        ("generator open-loop LPs", generator),
        ("robot open-loop LPs", robot_open),
        ("robot closed loop", robot_closed),
        ("oracle maximality", maximality),
        ("Farkas equivalence", farkas_equivalence),
        ("scenario conservatism", conservatism),
        ("spec compiler", spec_compiler),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let v = check();
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!(
            "[{tag}] {}. {name}: {} ({:.1?})",
            i + 1,
            v.detail,
            t.elapsed()
        );
        failed += usize::from(!v.pass);
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
