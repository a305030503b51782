//! Block shapes and the row-wise robust slack against vertex enumeration.

use proptest::collection::vec;
use proptest::prelude::*;
use resilience_core::farkas::{certify_vertices, closed_loop_blocks, open_loop_blocks};
use resilience_core::model::{
    rollout, Controller, DisturbanceSequence, LinearFeedback, OpenLoopSequence,
};
use resilience_core::spec::{margin_states, HalfspacePolytope};
use resilience_core::{LtvSystem, Matrix, TimedSets};

#[derive(Clone, Debug)]
struct Case {
    sys: LtvSystem,
    sets: TimedSets,
    x0: Vec<f64>,
    gain: Matrix,
    offset: Vec<f64>,
    inputs: Vec<Vec<f64>>,
    mu: f64,
    eps: f64,
    samples: Vec<Vec<Vec<f64>>>,
}

fn matrix(rows: usize, cols: usize, bound: f64) -> impl Strategy<Value = Matrix> {
    vec(-bound..bound, rows * cols).prop_map(move |v| Matrix::from_vec(rows, cols, v))
}

fn case() -> impl Strategy<Value = Case> {
    (1..=2usize, 1..=2usize, 1..=3usize).prop_flat_map(|(n, m, horizon)| {
        let boxes = vec(vec((0.3..2.0f64, 0.3..2.0f64), n), horizon + 1);
        (
            (
                vec(matrix(n, n, 1.2), horizon),
                vec(matrix(n, m, 1.0), horizon),
            ),
            boxes,
            vec(-0.3..0.3f64, n),
            (matrix(m, n, 0.8), vec(-0.5..0.5f64, m)),
            vec(vec(-0.5..0.5f64, m), horizon),
            (0.0..0.5f64, 0.1..2.0f64),
            vec(vec(vec(-1.0..1.0f64, n), horizon), 30),
        )
            .prop_map(
                |((a, b), boxes, x0, (gain, offset), inputs, (mu, eps), samples)| {
                    let polys = boxes
                        .into_iter()
                        .map(|iv| {
                            let iv: Vec<(f64, f64)> =
                                iv.into_iter().map(|(lo, hi)| (-lo, hi)).collect();
                            let p = HalfspacePolytope::from_box(&iv);
                            (p.g, p.h)
                        })
                        .collect();
                    Case {
                        sys: LtvSystem::new(a, b).unwrap(),
                        sets: TimedSets::from_polytopes(polys).unwrap(),
                        x0,
                        gain,
                        offset,
                        inputs,
                        mu,
                        eps,
                        samples,
                    }
                },
            )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn block_shapes_and_zero_initial_columns(c in case()) {
        let (n, m, horizon) = (c.x0.len(), c.offset.len(), c.inputs.len());
        let q: usize = c.sets.row_counts().iter().sum();
        let closed = closed_loop_blocks(&c.sys, &c.sets, &c.x0, &c.gain, true).unwrap();
        let open = open_loop_blocks(&c.sys, &c.sets, &c.x0).unwrap();
        prop_assert_eq!(closed.e.shape(), (q + 2 * m * horizon, n * (horizon + 1)));
        prop_assert_eq!(closed.param_dim(), m);
        prop_assert_eq!(open.e.shape(), (q, n * (horizon + 1)));
        prop_assert_eq!(open.param_dim(), m * horizon);
        for blocks in [&closed, &open] {
            for i in 0..blocks.rows() {
                prop_assert!(blocks.e.row(i)[..n].iter().all(|v| *v == 0.0));
            }
        }
    }

    #[test]
    fn closed_loop_robust_slack_equals_vertex_minimum(c in case()) {
        let blocks = closed_loop_blocks(&c.sys, &c.sets, &c.x0, &c.gain, true).unwrap();
        let ctrl = Controller::Linear(LinearFeedback::new(c.gain.clone(), c.offset.clone()));
        let cert = certify_vertices(&c.sys, &ctrl, &c.x0, c.mu, &c.sets, Some(c.eps)).unwrap();
        let slack = blocks.robust_slack(c.mu, &c.offset, c.eps);
        prop_assert!((slack - cert.worst_margin).abs() <= 1e-9, "{} vs {}", slack, cert.worst_margin);
    }

    #[test]
    fn open_loop_robust_slack_equals_vertex_minimum(c in case()) {
        let blocks = open_loop_blocks(&c.sys, &c.sets, &c.x0).unwrap();
        let ctrl = Controller::OpenLoop(OpenLoopSequence { inputs: c.inputs.clone() });
        let cert = certify_vertices(&c.sys, &ctrl, &c.x0, c.mu, &c.sets, None).unwrap();
        let slack = blocks.robust_slack(c.mu, &c.inputs.concat(), 0.0);
        prop_assert!((slack - cert.worst_margin).abs() <= 1e-9, "{} vs {}", slack, cert.worst_margin);
    }

    #[test]
    fn interior_disturbances_never_beat_the_vertices(c in case()) {
        let ctrl = Controller::Linear(LinearFeedback::new(c.gain.clone(), c.offset.clone()));
        let cert = certify_vertices(&c.sys, &ctrl, &c.x0, c.mu, &c.sets, None).unwrap();
        for s in &c.samples {
            let d = DisturbanceSequence(s.iter().map(|v| v.iter().map(|x| x * c.mu).collect()).collect());
            let t = rollout(&c.sys, &ctrl, &c.x0, &d).unwrap();
            prop_assert!(margin_states(&t.states, &c.sets).unwrap() >= cert.worst_margin - 1e-9);
        }
    }
}
