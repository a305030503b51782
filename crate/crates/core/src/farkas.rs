//! Stacked robust-constraint blocks and their reduction to finitely many
//! deterministic constraints.
//!
//! With the padded disturbance stack `Y = (1/μ)(0, d₀, …, d_{N−1})`, every
//! state and input constraint of the specification reads `μ E_i Y ≤ F_i`.
//! Requiring this for all `‖Y‖_∞ ≤ 1` is equivalent to `μ‖E_i‖₁ ≤ F_i`, which is
//! the form used by the exact solvers. The explicit multiplier form is kept
//! for cross-checking.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Matrix;
use crate::model::{
    closed_loop_products, rollout, rollout_unchecked, Controller, DisturbanceSequence, Dynamics,
    LtvSystem, ModelError,
};
use crate::scalar::{l1_norm, Scalar};
use crate::spec::{margin_unchecked, TimedSets};

/// Largest `n·N` accepted by [`certify_vertices`].
pub const VERTEX_GUARD: usize = 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FarkasError {
    #[error(
        "specification is not polytopic; the exact reduction needs one halfspace polytope per step"
    )]
    Unsupported,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("vertex enumeration needs 2^{required} rollouts, limit is 2^{limit}")]
    Guard { required: usize, limit: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopKind {
    Closed,
    Open,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowLabel {
    State { step: usize, row: usize },
    Input { step: usize, row: usize },
}

/// `E` and the affine decomposition `F = F_const + F_param·p + F_eps·ε`.
///
/// `p` is `α₂` (length `m`) in closed loop and the scaled input stack
/// `v = (v₀, …, v_{N−1})` (length `mN`) in open loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FarkasBlocks<T> {
    pub kind: LoopKind,
    pub state_dim: usize,
    pub input_dim: usize,
    pub horizon: usize,
    pub e: Matrix<T>,
    pub f_const: Vec<T>,
    pub f_param: Matrix<T>,
    pub f_eps: Vec<T>,
    pub labels: Vec<RowLabel>,
}

/// `[I; −I]` of size `2n(N+1) × n(N+1)`.
pub fn a_b<T: Scalar>(n: usize, horizon: usize) -> Matrix<T> {
    let d = n * (horizon + 1);
    Matrix::identity(d).vstack(&Matrix::identity(d).neg())
}

pub fn b_b<T: Scalar>(n: usize, horizon: usize) -> Vec<T> {
    vec![T::one(); 2 * n * (horizon + 1)]
}

impl<T: Scalar> FarkasBlocks<T> {
    pub fn rows(&self) -> usize {
        self.e.rows()
    }

    pub fn param_dim(&self) -> usize {
        self.f_param.cols()
    }

    /// `‖E_i‖₁` for every row.
    pub fn l1_row_norms(&self) -> Vec<T> {
        (0..self.e.rows()).map(|i| l1_norm(self.e.row(i))).collect()
    }

    /// `F` evaluated at parameter `p` and input bound `eps`.
    pub fn f_at(&self, p: &[T], eps: T) -> Vec<T> {
        let fp = self.f_param.mul_vec(p);
        (0..self.rows())
            .map(|i| {
                let e = if self.f_eps[i] == T::zero() {
                    T::zero()
                } else {
                    self.f_eps[i] * eps
                };
                self.f_const[i] + fp[i] + e
            })
            .collect()
    }

    /// `min_i (F_i − μ‖E_i‖₁)`: non-negative iff the robust constraint holds.
    pub fn robust_slack(&self, mu: T, p: &[T], eps: T) -> T {
        self.f_at(p, eps)
            .iter()
            .zip(self.l1_row_norms())
            .fold(T::infinity(), |m, (f, norm)| m.min(*f - mu * norm))
    }

    /// Explicit non-negative multiplier `P = [max(μE, 0), max(−μE, 0)]`,
    /// which satisfies `P A_b = μE` and `P B_b = μ‖E_i‖₁` row-wise.
    pub fn multiplier(&self, mu: T) -> Matrix<T> {
        let (r, d) = self.e.shape();
        Matrix::from_fn(r, 2 * d, |i, j| {
            let v = mu * self.e[(i, j % d)];
            if j < d {
                v.max(T::zero())
            } else {
                (-v).max(T::zero())
            }
        })
    }
}

fn check_inputs<T: Scalar>(
    system: &LtvSystem<T>,
    sets: &TimedSets<T>,
    x0: &[T],
) -> Result<(), FarkasError> {
    if !sets.polytopic {
        return Err(FarkasError::Unsupported);
    }
    let (n, horizon) = (system.state_dim(), system.horizon());
    if sets.state_dim != n || sets.horizon != horizon {
        return Err(FarkasError::Dimension(format!(
            "specification is over {} states and {} steps, system has {n} and {horizon}",
            sets.state_dim, sets.horizon
        )));
    }
    if x0.len() != n {
        return Err(FarkasError::Dimension(format!(
            "x0 has length {}, expected {n}",
            x0.len()
        )));
    }
    Ok(())
}

/// `E_k = [0, P(k,0), …, P(k,k−1), 0, …]`, an `n × n(N+1)` block row.
fn disturbance_block<T: Scalar>(
    products: &crate::model::TransitionTable<T>,
    k: usize,
) -> Matrix<T> {
    let n = products.state_dim();
    let mut e = Matrix::zeros(n, n * (products.horizon() + 1));
    for i in 0..k {
        e.set_block(0, n * (i + 1), products.get(k, i as isize));
    }
    e
}

/// Blocks for `u = α₁x + α₂`. Input rows (`‖u(k)‖_∞ ≤ ε`) are added only when
/// `with_inputs` is set.
pub fn closed_loop_blocks<T: Scalar>(
    system: &LtvSystem<T>,
    sets: &TimedSets<T>,
    x0: &[T],
    alpha1: &Matrix<T>,
    with_inputs: bool,
) -> Result<FarkasBlocks<T>, FarkasError> {
    check_inputs(system, sets, x0)?;
    let (n, m, horizon) = (system.state_dim(), system.input_dim(), system.horizon());
    let products = closed_loop_products(system, Some(alpha1))?;
    let cols = n * (horizon + 1);
    let mut e_rows: Vec<Vec<T>> = Vec::new();
    let mut f_const = Vec::new();
    let mut f_param: Vec<Vec<T>> = Vec::new();
    let mut f_eps = Vec::new();
    let mut labels = Vec::new();

    // Per step: E_k, free response P(k,−1)x0 and Σ_i P(k,i)B_i.
    let mut per_step = Vec::with_capacity(horizon + 1);
    for k in 0..=horizon {
        let ek = disturbance_block(&products, k);
        let free = products.get(k, -1).mul_vec(x0);
        let mut sum_b = Matrix::zeros(n, m);
        for i in 0..k {
            sum_b = sum_b.add(&products.get(k, i as isize).matmul(system.b(i)));
        }
        per_step.push((ek, free, sum_b));
    }

    for (k, (ek, free, sum_b)) in per_step.iter().enumerate() {
        let (g, h) = sets.polytope(k);
        let ge = g.matmul(ek);
        let gfree = g.mul_vec(free);
        let gb = g.matmul(sum_b);
        for r in 0..g.rows() {
            e_rows.push(ge.row(r).to_vec());
            f_const.push(h[r] - gfree[r]);
            f_param.push(gb.row(r).iter().map(|v| -*v).collect());
            f_eps.push(T::zero());
            labels.push(RowLabel::State { step: k, row: r });
        }
    }
    if with_inputs {
        for (k, (ek, free, sum_b)) in per_step.iter().enumerate().take(horizon) {
            let ae = alpha1.matmul(ek);
            let afree = alpha1.mul_vec(free);
            let ab = alpha1.matmul(sum_b).add(&Matrix::identity(m));
            for sign in [T::one(), -T::one()] {
                for j in 0..m {
                    let row = if sign > T::zero() { j } else { m + j };
                    e_rows.push(ae.row(j).iter().map(|v| sign * *v).collect());
                    f_const.push(-sign * afree[j]);
                    f_param.push(ab.row(j).iter().map(|v| -sign * *v).collect());
                    f_eps.push(T::one());
                    labels.push(RowLabel::Input { step: k, row });
                }
            }
        }
    }
    Ok(FarkasBlocks {
        kind: LoopKind::Closed,
        state_dim: n,
        input_dim: m,
        horizon,
        e: rows_to_matrix(&e_rows, cols),
        f_const,
        f_param: rows_to_matrix(&f_param, m),
        f_eps,
        labels,
    })
}

/// Blocks for an open-loop input sequence, affine in `v = (u₀, …, u_{N−1})`.
pub fn open_loop_blocks<T: Scalar>(
    system: &LtvSystem<T>,
    sets: &TimedSets<T>,
    x0: &[T],
) -> Result<FarkasBlocks<T>, FarkasError> {
    check_inputs(system, sets, x0)?;
    let (n, m, horizon) = (system.state_dim(), system.input_dim(), system.horizon());
    let products = closed_loop_products(system, None)?;
    let cols = n * (horizon + 1);
    let mut e_rows = Vec::new();
    let mut f_const = Vec::new();
    let mut f_param = Vec::new();
    let mut labels = Vec::new();
    for k in 0..=horizon {
        let (g, h) = sets.polytope(k);
        let ge = g.matmul(&disturbance_block(&products, k));
        let gfree = g.mul_vec(&products.get(k, -1).mul_vec(x0));
        let mut fv = Matrix::zeros(g.rows(), m * horizon);
        for i in 0..k {
            fv.set_block(
                0,
                m * i,
                &g.matmul(&products.get(k, i as isize).matmul(system.b(i)))
                    .neg(),
            );
        }
        for r in 0..g.rows() {
            e_rows.push(ge.row(r).to_vec());
            f_const.push(h[r] - gfree[r]);
            f_param.push(fv.row(r).to_vec());
            labels.push(RowLabel::State { step: k, row: r });
        }
    }
    let r = e_rows.len();
    Ok(FarkasBlocks {
        kind: LoopKind::Open,
        state_dim: n,
        input_dim: m,
        horizon,
        e: rows_to_matrix(&e_rows, cols),
        f_const,
        f_param: rows_to_matrix(&f_param, m * horizon),
        f_eps: vec![T::zero(); r],
        labels,
    })
}

fn rows_to_matrix<T: Scalar>(rows: &[Vec<T>], cols: usize) -> Matrix<T> {
    Matrix::from_vec(rows.len(), cols, rows.concat())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VertexCertificate<T> {
    pub satisfied: bool,
    /// Smallest combined margin over all vertices: the specification margin,
    /// and `ε − ‖u(k)‖_∞` when an input bound is given.
    pub worst_margin: T,
    pub witness: DisturbanceSequence<T>,
    pub vertices: u64,
}

fn vertex_disturbance<T: Scalar>(
    index: u64,
    n: usize,
    horizon: usize,
    mu: T,
) -> DisturbanceSequence<T> {
    DisturbanceSequence(
        (0..horizon)
            .map(|k| {
                (0..n)
                    .map(|j| {
                        if index.checked_shr((k * n + j) as u32).unwrap_or(0) & 1 == 1 {
                            mu
                        } else {
                            -mu
                        }
                    })
                    .collect()
            })
            .collect(),
    )
}

/// Checks the controller against every disturbance sequence with components
/// in `{−μ, +μ}`. Exact for affine dynamics and polytopic specifications.
pub fn certify_vertices<T: Scalar, S: Dynamics<T> + ?Sized>(
    system: &S,
    controller: &Controller<T>,
    x0: &[T],
    mu: T,
    sets: &TimedSets<T>,
    eps: Option<T>,
) -> Result<VertexCertificate<T>, FarkasError> {
    let (n, horizon) = (system.state_dim(), system.horizon());
    if sets.state_dim != n || sets.horizon != horizon {
        return Err(FarkasError::Dimension(
            "specification does not match system".into(),
        ));
    }
    // Validates dimensions once; vertices then use the unchecked rollout.
    rollout(
        system,
        controller,
        x0,
        &DisturbanceSequence::zeros(n, horizon),
    )?;
    let bits = if mu == T::zero() { 0 } else { n * horizon };
    if bits > VERTEX_GUARD {
        return Err(FarkasError::Guard {
            required: bits,
            limit: VERTEX_GUARD,
        });
    }
    let count = 1u64 << bits;
    let evaluate = |index: u64| -> (T, u64) {
        let d = vertex_disturbance(index, n, horizon, mu);
        let m = match rollout_unchecked(system, controller, x0, &d) {
            Ok(t) => {
                let mut m = margin_unchecked(&t.states, sets);
                if let Some(eps) = eps {
                    for u in &t.inputs {
                        for ui in u {
                            m = m.min(eps - ui.abs());
                        }
                    }
                }
                if m.is_nan() {
                    T::neg_infinity()
                } else {
                    m
                }
            }
            Err(_) => T::neg_infinity(),
        };
        (m, index)
    };
    let pick = |a: (T, u64), b: (T, u64)| {
        if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) {
            b
        } else {
            a
        }
    };
    let (worst, index) = (0..count)
        .into_par_iter()
        .map(evaluate)
        .reduce(|| (T::infinity(), u64::MAX), pick);
    let index = if index == u64::MAX { 0 } else { index };
    Ok(VertexCertificate {
        satisfied: worst >= -T::CERT_TOL,
        worst_margin: worst,
        witness: vertex_disturbance(index, n, horizon, mu),
        vertices: count,
    })
}
