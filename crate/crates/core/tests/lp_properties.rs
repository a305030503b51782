//! Dual certificates and determinism of the simplex solver.

use proptest::collection::vec;
use proptest::prelude::*;
use resilience_core::lp::{solve, LpStatus, Sense};
use resilience_core::LinearProgram;

/// `max/min c·x` s.t. `Ax ≤ b`, `0 ≤ x ≤ u` with `b ≥ 0`, so `x = 0` is feasible.
fn program() -> impl Strategy<Value = LinearProgram> {
    (1..=6usize, 1..=6usize, any::<bool>()).prop_flat_map(|(n, rows, maximize)| {
        (
            vec(-2.0..2.0f64, n),
            vec((vec(-2.0..2.0f64, n), 0.0..3.0f64), rows),
            vec(0.5..4.0f64, n),
        )
            .prop_map(move |(c, rows, upper)| {
                let sense = if maximize {
                    Sense::Maximize
                } else {
                    Sense::Minimize
                };
                let mut lp = LinearProgram::new(sense, c);
                for (a, b) in rows {
                    lp.add_le(a, b);
                }
                for (j, u) in upper.into_iter().enumerate() {
                    lp.set_bounds(j, 0.0, u);
                }
                lp
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn optimal_solutions_carry_a_dual_certificate(lp in program()) {
        let s = solve(&lp).unwrap();
        prop_assert_eq!(s.status, LpStatus::Optimal);
        prop_assert!(lp.max_violation(&s.x) <= 1e-8);
        let sign = if lp.sense == Sense::Maximize { 1.0 } else { -1.0 };
        let tol = 1e-7;
        // Sign convention: multipliers of a maximization are non-negative.
        for (y, row) in s.duals.iter().zip(&lp.inequalities) {
            prop_assert!(sign * y >= -tol, "dual {}", y);
            let slack = row.rhs - row.coeffs.iter().zip(&s.x).map(|(a, x)| a * x).sum::<f64>();
            prop_assert!((y * slack).abs() <= tol, "complementary slackness {} {}", y, slack);
        }
        // Reduced costs are absorbed by the active bounds.
        let mut bound_part = 0.0;
        for j in 0..lp.num_vars() {
            let aty: f64 = lp.inequalities.iter().zip(&s.duals).map(|(r, y)| r.coeffs[j] * y).sum();
            let reduced = sign * (lp.objective[j] - aty);
            let (x, u) = (s.x[j], lp.upper[j]);
            if x > tol && x < u - tol {
                prop_assert!(reduced.abs() <= tol, "interior variable {} has reduced cost {}", j, reduced);
            } else if x <= tol {
                prop_assert!(reduced <= tol, "variable {} at lower bound has reduced cost {}", j, reduced);
            } else {
                prop_assert!(reduced >= -tol, "variable {} at upper bound has reduced cost {}", j, reduced);
            }
            bound_part += (lp.objective[j] - aty) * x;
        }
        let dual_objective: f64 = lp.inequalities.iter().zip(&s.duals).map(|(r, y)| r.rhs * y).sum();
        prop_assert!((s.objective - dual_objective - bound_part).abs() <= 1e-7 * (1.0 + s.objective.abs()));
    }

    #[test]
    fn repeated_solves_are_identical(lp in program()) {
        prop_assert_eq!(solve(&lp).unwrap(), solve(&lp).unwrap());
    }
}
