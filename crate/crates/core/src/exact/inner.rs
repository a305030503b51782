//! The linear program solved for fixed `α₁` (or in open loop): variables
//! `(μ, ε, p)` where `p` is `α₂` or the scaled input stack.

use serde::{Deserialize, Serialize};

use crate::farkas::{FarkasBlocks, LoopKind, RowLabel};
use crate::lp::{solve, LinearProgram, LpError, LpStatus, Sense};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReductionForm {
    /// `μ‖E_i‖₁ ≤ F_i`.
    L1,
    /// Explicit `P ≥ 0`, `P A_b = μE`, `P B_b ≤ F`.
    Multiplier,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MuSpec<T> {
    Variable,
    Fixed(T),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EpsSpec<T> {
    Variable {
        cap: Option<T>,
    },
    Fixed(T),
    /// No input bound at all; input rows are dropped.
    Unconstrained,
}

/// Maximize `w₁μ − w₂ε`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InnerQuery<T> {
    pub w1: T,
    pub w2: T,
    pub mu: MuSpec<T>,
    pub eps: EpsSpec<T>,
}

impl<T: Scalar> InnerQuery<T> {
    pub fn resilience(eps0: Option<T>) -> Self {
        Self {
            w1: T::one(),
            w2: T::zero(),
            mu: MuSpec::Variable,
            eps: eps0
                .filter(|e| e.is_finite())
                .map_or(EpsSpec::Unconstrained, EpsSpec::Fixed),
        }
    }

    pub fn effort(mu0: T) -> Self {
        Self {
            w1: T::zero(),
            w2: T::one(),
            mu: MuSpec::Fixed(mu0),
            eps: EpsSpec::Variable { cap: None },
        }
    }

    pub fn pareto(w1: T, w2: T, eps_cap: Option<T>) -> Self {
        Self {
            w1,
            w2,
            mu: MuSpec::Variable,
            eps: EpsSpec::Variable {
                cap: eps_cap.filter(|e| e.is_finite()),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InnerSolution<T> {
    pub mu: T,
    pub eps: T,
    pub param: Vec<T>,
    pub objective: T,
}

#[derive(Clone, Debug, PartialEq)]
pub enum InnerOutcome<T> {
    Optimal(InnerSolution<T>),
    Infeasible,
    Unbounded,
}

fn row_active<T>(blocks: &FarkasBlocks<T>, query: &InnerQuery<T>, i: usize) -> bool {
    !(matches!(query.eps, EpsSpec::Unconstrained)
        && matches!(blocks.labels[i], RowLabel::Input { .. }))
}

/// Builds the program. With `slack` set, a variable `s ≥ 0` is subtracted
/// from every robust row and the objective becomes `min s`.
pub fn build_program<T: Scalar>(
    blocks: &FarkasBlocks<T>,
    query: &InnerQuery<T>,
    form: ReductionForm,
    slack: bool,
) -> LinearProgram<T> {
    let p = blocks.param_dim();
    let d = blocks.e.cols();
    let active: Vec<usize> = (0..blocks.rows())
        .filter(|i| row_active(blocks, query, *i))
        .collect();
    let s_idx = 2 + p;
    let mult_base = s_idx + usize::from(slack);
    let nvars = mult_base
        + if form == ReductionForm::Multiplier {
            2 * d * active.len()
        } else {
            0
        };

    let mut objective = vec![T::zero(); nvars];
    if slack {
        objective[s_idx] = -T::one();
    } else {
        objective[0] = query.w1;
        objective[1] = -query.w2;
    }
    let mut lp = LinearProgram::new(Sense::Maximize, objective);
    match query.mu {
        MuSpec::Variable => lp.set_bounds(0, T::zero(), T::infinity()),
        MuSpec::Fixed(m) => lp.set_bounds(0, m, m),
    };
    match query.eps {
        EpsSpec::Variable { cap } => lp.set_bounds(1, T::zero(), cap.unwrap_or(T::infinity())),
        EpsSpec::Fixed(e) => lp.set_bounds(1, e, e),
        EpsSpec::Unconstrained => lp.set_bounds(1, T::zero(), T::zero()),
    };
    for j in 0..p {
        lp.set_free(2 + j);
    }
    let norms = blocks.l1_row_norms();
    for (a, &i) in active.iter().enumerate() {
        let mut row = vec![T::zero(); nvars];
        for j in 0..p {
            row[2 + j] = -blocks.f_param[(i, j)];
        }
        row[1] = -blocks.f_eps[i];
        if slack {
            row[s_idx] = -T::one();
        }
        match form {
            ReductionForm::L1 => row[0] = norms[i],
            ReductionForm::Multiplier => {
                let base = mult_base + 2 * d * a;
                for j in 0..2 * d {
                    row[base + j] = T::one();
                }
                for j in 0..d {
                    let mut eq = vec![T::zero(); nvars];
                    eq[base + j] = T::one();
                    eq[base + d + j] = -T::one();
                    eq[0] = -blocks.e[(i, j)];
                    lp.add_eq(eq, T::zero());
                }
            }
        }
        let scale = row.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        if scale > T::zero() && scale.is_finite() {
            let inv = T::one() / scale;
            lp.add_le(
                row.iter().map(|v| *v * inv).collect(),
                blocks.f_const[i] * inv,
            );
        } else {
            lp.add_le(row, blocks.f_const[i]);
        }
    }
    if blocks.kind == LoopKind::Open && !matches!(query.eps, EpsSpec::Unconstrained) {
        for j in 0..p {
            for sign in [T::one(), -T::one()] {
                let mut row = vec![T::zero(); nvars];
                row[2 + j] = sign;
                row[1] = -T::one();
                lp.add_le(row, T::zero());
            }
        }
    }
    lp
}

pub fn solve_inner<T: Scalar>(
    blocks: &FarkasBlocks<T>,
    query: &InnerQuery<T>,
    form: ReductionForm,
) -> Result<InnerOutcome<T>, LpError> {
    let lp = build_program(blocks, query, form, false);
    let sol = solve(&lp)?;
    Ok(match sol.status {
        LpStatus::Infeasible => InnerOutcome::Infeasible,
        LpStatus::Unbounded => InnerOutcome::Unbounded,
        LpStatus::Optimal => {
            let p = blocks.param_dim();
            InnerOutcome::Optimal(InnerSolution {
                mu: sol.x[0],
                eps: sol.x[1],
                param: sol.x[2..2 + p].to_vec(),
                objective: sol.objective,
            })
        }
    })
}

/// Smallest uniform violation `s` of the robust rows; zero iff the inner
/// program is feasible.
pub fn minimal_slack<T: Scalar>(
    blocks: &FarkasBlocks<T>,
    query: &InnerQuery<T>,
) -> Result<T, LpError> {
    let mut lp = build_program(blocks, query, ReductionForm::L1, true);
    // Cap the slack variable's effect on μ: the smallest violation is sought
    // at the smallest admissible μ.
    if let MuSpec::Variable = query.mu {
        lp.set_bounds(0, T::zero(), T::zero());
    }
    let sol = solve(&lp)?;
    Ok(match sol.status {
        LpStatus::Optimal => -sol.objective,
        _ => T::infinity(),
    })
}

/// Smallest `ε` that satisfies every input row at `(μ, p)`: the worst-case
/// input magnitude of the synthesized controller. Open loop: `max |v_j|`.
pub fn required_effort<T: Scalar>(blocks: &FarkasBlocks<T>, mu: T, param: &[T]) -> T {
    match blocks.kind {
        LoopKind::Open => param.iter().fold(T::zero(), |m, v| m.max(v.abs())),
        LoopKind::Closed => {
            let norms = blocks.l1_row_norms();
            let fp = blocks.f_param.mul_vec(param);
            let mut need = T::zero();
            for i in 0..blocks.rows() {
                if matches!(blocks.labels[i], RowLabel::Input { .. }) {
                    let lhs = if mu == T::zero() {
                        T::zero()
                    } else {
                        mu * norms[i]
                    };
                    need = need.max(lhs - blocks.f_const[i] - fp[i]);
                }
            }
            need
        }
    }
}
