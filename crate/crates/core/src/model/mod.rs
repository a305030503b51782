//! Plants, controller templates, rollout and transition-matrix products.

pub mod builtin;
mod monomial;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Matrix;
use crate::scalar::{all_finite, Scalar};

pub use monomial::{monomial_basis, monomial_count, monomial_exponents};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("state became non-finite at step {step}")]
    Overflow { step: usize },
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("model `{model}` is missing parameter `{param}`")]
    MissingParameter { model: String, param: String },
}

/// Anything that maps `(k, x(k), u(k))` to the nominal next state.
/// Disturbances are added by [`rollout`].
pub trait Dynamics<T: Scalar>: Send + Sync {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn horizon(&self) -> usize;
    fn step(&self, k: usize, x: &[T], u: &[T]) -> Vec<T>;

    /// [`Dynamics::step`] written into `out`.
    fn step_into(&self, k: usize, x: &[T], u: &[T], out: &mut [T]) {
        out.copy_from_slice(&self.step(k, x, u));
    }
}

/// `x(k+1) = A_k x(k) + B_k u(k) + d(k)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LtvSystem<T> {
    a: Vec<Matrix<T>>,
    b: Vec<Matrix<T>>,
}

impl<T: Scalar> LtvSystem<T> {
    pub fn new(a: Vec<Matrix<T>>, b: Vec<Matrix<T>>) -> Result<Self, ModelError> {
        if a.is_empty() {
            return Err(ModelError::Dimension("horizon must be at least 1".into()));
        }
        if a.len() != b.len() {
            return Err(ModelError::Dimension(format!(
                "{} A matrices but {} B matrices",
                a.len(),
                b.len()
            )));
        }
        let n = a[0].rows();
        let m = b[0].cols();
        if n == 0 || m == 0 {
            return Err(ModelError::Dimension(
                "state and input dimensions must be positive".into(),
            ));
        }
        for (k, (ak, bk)) in a.iter().zip(&b).enumerate() {
            if ak.shape() != (n, n) {
                return Err(ModelError::Dimension(format!(
                    "A_{k} is {:?}, expected ({n}, {n})",
                    ak.shape()
                )));
            }
            if bk.shape() != (n, m) {
                return Err(ModelError::Dimension(format!(
                    "B_{k} is {:?}, expected ({n}, {m})",
                    bk.shape()
                )));
            }
            if !ak.is_finite() || !bk.is_finite() {
                return Err(ModelError::NonFinite(format!(
                    "system matrices at step {k}"
                )));
            }
        }
        Ok(Self { a, b })
    }

    /// Same `(A, B)` repeated over `horizon` steps.
    pub fn time_invariant(a: Matrix<T>, b: Matrix<T>, horizon: usize) -> Result<Self, ModelError> {
        Self::new(vec![a; horizon], vec![b; horizon])
    }

    pub fn a(&self, k: usize) -> &Matrix<T> {
        &self.a[k]
    }

    pub fn b(&self, k: usize) -> &Matrix<T> {
        &self.b[k]
    }

    pub fn a_matrices(&self) -> &[Matrix<T>] {
        &self.a
    }

    pub fn b_matrices(&self) -> &[Matrix<T>] {
        &self.b
    }
}

impl<T: Scalar> Dynamics<T> for LtvSystem<T> {
    fn state_dim(&self) -> usize {
        self.a[0].rows()
    }

    fn input_dim(&self) -> usize {
        self.b[0].cols()
    }

    fn horizon(&self) -> usize {
        self.a.len()
    }

    fn step(&self, k: usize, x: &[T], u: &[T]) -> Vec<T> {
        let ax = self.a[k].mul_vec(x);
        let bu = self.b[k].mul_vec(u);
        ax.iter().zip(&bu).map(|(p, q)| *p + *q).collect()
    }

    fn step_into(&self, k: usize, x: &[T], u: &[T], out: &mut [T]) {
        let (a, b) = (&self.a[k], &self.b[k]);
        for (i, o) in out.iter_mut().enumerate() {
            *o = crate::scalar::dot(a.row(i), x) + crate::scalar::dot(b.row(i), u);
        }
    }
}

/// Deterministic transition map `(k, x, u) -> f(k, x, u)`.
pub type TransitionFn<T> = Arc<dyn Fn(usize, &[T], &[T]) -> Vec<T> + Send + Sync>;

/// Black-box plant: only the transition map is observed.
#[derive(Clone)]
pub struct NonlinearSystem<T> {
    pub name: String,
    state_dim: usize,
    input_dim: usize,
    horizon: usize,
    transition: TransitionFn<T>,
}

impl<T: Scalar> NonlinearSystem<T> {
    pub fn new(
        name: impl Into<String>,
        state_dim: usize,
        input_dim: usize,
        horizon: usize,
        transition: TransitionFn<T>,
    ) -> Result<Self, ModelError> {
        if state_dim == 0 || input_dim == 0 || horizon == 0 {
            return Err(ModelError::Dimension(
                "state, input and horizon must be positive".into(),
            ));
        }
        Ok(Self {
            name: name.into(),
            state_dim,
            input_dim,
            horizon,
            transition,
        })
    }
}

impl<T> fmt::Debug for NonlinearSystem<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NonlinearSystem")
            .field("name", &self.name)
            .field("state_dim", &self.state_dim)
            .field("input_dim", &self.input_dim)
            .field("horizon", &self.horizon)
            .finish()
    }
}

impl<T: Scalar> Dynamics<T> for NonlinearSystem<T> {
    fn state_dim(&self) -> usize {
        self.state_dim
    }

    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn step(&self, k: usize, x: &[T], u: &[T]) -> Vec<T> {
        (self.transition)(k, x, u)
    }
}

/// Either kind of plant.
#[derive(Clone, Debug)]
pub enum Plant<T> {
    Ltv(LtvSystem<T>),
    Nonlinear(NonlinearSystem<T>),
}

impl<T: Scalar> Plant<T> {
    pub fn as_ltv(&self) -> Option<&LtvSystem<T>> {
        match self {
            Plant::Ltv(s) => Some(s),
            Plant::Nonlinear(_) => None,
        }
    }
}

impl<T: Scalar> Dynamics<T> for Plant<T> {
    fn state_dim(&self) -> usize {
        match self {
            Plant::Ltv(s) => s.state_dim(),
            Plant::Nonlinear(s) => s.state_dim(),
        }
    }

    fn input_dim(&self) -> usize {
        match self {
            Plant::Ltv(s) => s.input_dim(),
            Plant::Nonlinear(s) => s.input_dim(),
        }
    }

    fn horizon(&self) -> usize {
        match self {
            Plant::Ltv(s) => s.horizon(),
            Plant::Nonlinear(s) => s.horizon(),
        }
    }

    fn step(&self, k: usize, x: &[T], u: &[T]) -> Vec<T> {
        match self {
            Plant::Ltv(s) => s.step(k, x, u),
            Plant::Nonlinear(s) => s.step(k, x, u),
        }
    }

    fn step_into(&self, k: usize, x: &[T], u: &[T], out: &mut [T]) {
        match self {
            Plant::Ltv(s) => s.step_into(k, x, u, out),
            Plant::Nonlinear(s) => s.step_into(k, x, u, out),
        }
    }
}

/// `u = α₁ x + α₂`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFeedback<T> {
    pub alpha1: Matrix<T>,
    pub alpha2: Vec<T>,
}

/// `u = α φ(x)` with `φ` the graded-lex monomial basis of degree `degree`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolynomialFeedback<T> {
    pub degree: usize,
    pub coefficients: Matrix<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpenLoopSequence<T> {
    pub inputs: Vec<Vec<T>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Controller<T> {
    Linear(LinearFeedback<T>),
    Polynomial(PolynomialFeedback<T>),
    OpenLoop(OpenLoopSequence<T>),
    /// `u ≡ 0`.
    Zero {
        input_dim: usize,
    },
}

impl<T: Scalar> LinearFeedback<T> {
    pub fn new(alpha1: Matrix<T>, alpha2: Vec<T>) -> Self {
        Self { alpha1, alpha2 }
    }

    pub fn zero(n: usize, m: usize) -> Self {
        Self {
            alpha1: Matrix::zeros(m, n),
            alpha2: vec![T::zero(); m],
        }
    }

    /// Accumulates `α₂` first, matching the degree-1 polynomial evaluation bit for bit.
    pub fn apply(&self, x: &[T]) -> Vec<T> {
        (0..self.alpha1.rows())
            .map(|i| self.apply_row(i, x))
            .collect()
    }

    fn apply_row(&self, i: usize, x: &[T]) -> T {
        std::iter::once(self.alpha2[i])
            .chain(self.alpha1.row(i).iter().copied())
            .zip(std::iter::once(T::one()).chain(x.iter().copied()))
            .map(|(a, b)| a * b)
            .sum()
    }

    /// The equivalent degree-1 polynomial controller.
    pub fn to_polynomial(&self) -> PolynomialFeedback<T> {
        let (m, n) = self.alpha1.shape();
        let coefficients = Matrix::from_fn(m, n + 1, |i, j| {
            if j == 0 {
                self.alpha2[i]
            } else {
                self.alpha1[(i, j - 1)]
            }
        });
        PolynomialFeedback {
            degree: 1,
            coefficients,
        }
    }
}

impl<T: Scalar> PolynomialFeedback<T> {
    pub fn apply(&self, x: &[T]) -> Vec<T> {
        self.coefficients.mul_vec(&monomial_basis(x, self.degree))
    }
}

impl<T: Scalar> Controller<T> {
    pub fn input_dim(&self) -> usize {
        match self {
            Controller::Linear(c) => c.alpha1.rows(),
            Controller::Polynomial(c) => c.coefficients.rows(),
            Controller::OpenLoop(c) => c.inputs.first().map_or(0, Vec::len),
            Controller::Zero { input_dim } => *input_dim,
        }
    }

    /// Input applied at step `k` in state `x`.
    pub fn input(&self, k: usize, x: &[T]) -> Vec<T> {
        match self {
            Controller::Linear(c) => c.apply(x),
            Controller::Polynomial(c) => c.apply(x),
            Controller::OpenLoop(c) => c.inputs[k].clone(),
            Controller::Zero { input_dim } => vec![T::zero(); *input_dim],
        }
    }

    /// [`Controller::input`] written into `out`.
    pub fn input_into(&self, k: usize, x: &[T], out: &mut [T]) {
        match self {
            Controller::Linear(c) => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = c.apply_row(i, x);
                }
            }
            Controller::Polynomial(c) => out.copy_from_slice(&c.apply(x)),
            Controller::OpenLoop(c) => out.copy_from_slice(&c.inputs[k]),
            Controller::Zero { .. } => out.fill(T::zero()),
        }
    }

    pub fn check_dims(&self, n: usize, m: usize, horizon: usize) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::Dimension(msg));
        match self {
            Controller::Linear(c) => {
                if c.alpha1.shape() != (m, n) || c.alpha2.len() != m {
                    return bad(format!(
                        "linear feedback is {:?}/{}, system needs ({m}, {n})/{m}",
                        c.alpha1.shape(),
                        c.alpha2.len()
                    ));
                }
                if !c.alpha1.is_finite() || !all_finite(&c.alpha2) {
                    return Err(ModelError::NonFinite("linear feedback gains".into()));
                }
            }
            Controller::Polynomial(c) => {
                let d = monomial_count(n, c.degree);
                if c.coefficients.shape() != (m, d) {
                    return bad(format!(
                        "polynomial coefficients are {:?}, expected ({m}, {d})",
                        c.coefficients.shape()
                    ));
                }
                if !c.coefficients.is_finite() {
                    return Err(ModelError::NonFinite("polynomial coefficients".into()));
                }
            }
            Controller::OpenLoop(c) => {
                if c.inputs.len() != horizon || c.inputs.iter().any(|u| u.len() != m) {
                    return bad(format!(
                        "open-loop sequence must hold {horizon} inputs of length {m}"
                    ));
                }
                if c.inputs.iter().any(|u| !all_finite(u)) {
                    return Err(ModelError::NonFinite("open-loop inputs".into()));
                }
            }
            Controller::Zero { input_dim } => {
                if *input_dim != m {
                    return bad(format!(
                        "zero controller has {input_dim} inputs, system needs {m}"
                    ));
                }
            }
        }
        Ok(())
    }
}

/// `d_0 … d_{N-1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DisturbanceSequence<T>(pub Vec<Vec<T>>);

impl<T: Scalar> DisturbanceSequence<T> {
    pub fn zeros(n: usize, horizon: usize) -> Self {
        Self(vec![vec![T::zero(); n]; horizon])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn scaled(&self, s: T) -> Self {
        Self(
            self.0
                .iter()
                .map(|d| d.iter().map(|v| *v * s).collect())
                .collect(),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<T> {
    pub states: Vec<Vec<T>>,
    pub inputs: Vec<Vec<T>>,
}

/// Simulates `x(k+1) = f(k, x(k), u(k)) + d(k)` with `u(k)` from `controller`.
pub fn rollout<T: Scalar, S: Dynamics<T> + ?Sized>(
    system: &S,
    controller: &Controller<T>,
    x0: &[T],
    disturbance: &DisturbanceSequence<T>,
) -> Result<Trajectory<T>, ModelError> {
    let (n, m, horizon) = (system.state_dim(), system.input_dim(), system.horizon());
    if x0.len() != n {
        return Err(ModelError::Dimension(format!(
            "x0 has length {}, expected {n}",
            x0.len()
        )));
    }
    if !all_finite(x0) {
        return Err(ModelError::NonFinite("initial state".into()));
    }
    if disturbance.len() != horizon || disturbance.0.iter().any(|d| d.len() != n) {
        return Err(ModelError::Dimension(format!(
            "disturbance must hold {horizon} vectors of length {n}"
        )));
    }
    controller.check_dims(n, m, horizon)?;
    rollout_unchecked(system, controller, x0, disturbance)
}

/// [`rollout`] without the dimension checks, for inner loops that already
/// validated their inputs once.
pub fn rollout_unchecked<T: Scalar, S: Dynamics<T> + ?Sized>(
    system: &S,
    controller: &Controller<T>,
    x0: &[T],
    disturbance: &DisturbanceSequence<T>,
) -> Result<Trajectory<T>, ModelError> {
    let horizon = system.horizon();
    let mut states = Vec::with_capacity(horizon + 1);
    let mut inputs = Vec::with_capacity(horizon);
    let mut x = x0.to_vec();
    for k in 0..horizon {
        let u = controller.input(k, &x);
        if !all_finite(&u) {
            return Err(ModelError::Overflow { step: k });
        }
        let mut next = system.step(k, &x, &u);
        for (xi, di) in next.iter_mut().zip(&disturbance.0[k]) {
            *xi = *xi + *di;
        }
        if !all_finite(&next) {
            return Err(ModelError::Overflow { step: k + 1 });
        }
        states.push(std::mem::replace(&mut x, next));
        inputs.push(u);
    }
    states.push(x);
    Ok(Trajectory { states, inputs })
}

impl<T: Scalar> Trajectory<T> {
    /// Zero-filled storage for `horizon` steps.
    pub fn zeros(n: usize, m: usize, horizon: usize) -> Self {
        Self {
            states: vec![vec![T::zero(); n]; horizon + 1],
            inputs: vec![vec![T::zero(); m]; horizon],
        }
    }
}

/// [`rollout_unchecked`] with the disturbance scaled by `scale`, reusing the
/// storage of `out` (see [`Trajectory::zeros`]).
pub fn rollout_scaled_into<T: Scalar, S: Dynamics<T> + ?Sized>(
    system: &S,
    controller: &Controller<T>,
    x0: &[T],
    disturbance: &DisturbanceSequence<T>,
    scale: T,
    out: &mut Trajectory<T>,
) -> Result<(), ModelError> {
    out.states[0].copy_from_slice(x0);
    for k in 0..system.horizon() {
        let (done, rest) = out.states.split_at_mut(k + 1);
        let (x, next, u) = (&done[k], &mut rest[0], &mut out.inputs[k]);
        controller.input_into(k, x, u);
        if !all_finite(u) {
            return Err(ModelError::Overflow { step: k });
        }
        system.step_into(k, x, u, next);
        for (xi, di) in next.iter_mut().zip(&disturbance.0[k]) {
            *xi = *xi + *di * scale;
        }
        if !all_finite(next) {
            return Err(ModelError::Overflow { step: k + 1 });
        }
    }
    Ok(())
}

/// Products of (closed-loop) state matrices indexed by `(k, i)`:
/// `P(k, i) = M_{k-1} ⋯ M_{i+1}` with `M_j = A_j + B_j α₁` (or `A_j` in open
/// loop), `P(k, k-1) = I`, `P(0, -1) = I` and `P(0, i) = 0` for `i ≥ 0`.
#[derive(Clone, Debug)]
pub struct TransitionTable<T> {
    n: usize,
    /// `table[k][i + 1]` for `i ∈ {-1, …, k-1}`.
    table: Vec<Vec<Matrix<T>>>,
    zero: Matrix<T>,
}

impl<T: Scalar> TransitionTable<T> {
    pub fn get(&self, k: usize, i: isize) -> &Matrix<T> {
        assert!(i >= -1, "transition index below -1");
        if k == 0 && i >= 0 {
            return &self.zero;
        }
        let idx = (i + 1) as usize;
        assert!(idx <= k, "P({k}, {i}) is outside the table");
        &self.table[k][idx]
    }

    pub fn horizon(&self) -> usize {
        self.table.len() - 1
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn is_finite(&self) -> bool {
        self.table.iter().flatten().all(Matrix::is_finite)
    }
}

/// Builds the transition table for gain `alpha1` (`None` is open loop).
pub fn closed_loop_products<T: Scalar>(
    system: &LtvSystem<T>,
    alpha1: Option<&Matrix<T>>,
) -> Result<TransitionTable<T>, ModelError> {
    let n = system.state_dim();
    let m = system.input_dim();
    let horizon = system.horizon();
    if let Some(g) = alpha1 {
        if g.shape() != (m, n) {
            return Err(ModelError::Dimension(format!(
                "alpha1 is {:?}, expected ({m}, {n})",
                g.shape()
            )));
        }
    }
    let closed: Vec<Matrix<T>> = (0..horizon)
        .map(|j| match alpha1 {
            Some(g) => system.a(j).add(&system.b(j).matmul(g)),
            None => system.a(j).clone(),
        })
        .collect();
    let mut table = Vec::with_capacity(horizon + 1);
    for k in 0..=horizon {
        // row[i + 1] = P(k, i); fill downward from i = k - 1.
        let mut row = vec![Matrix::zeros(n, n); k + 1];
        let mut p = Matrix::identity(n);
        let mut i = k as isize - 1;
        loop {
            row[(i + 1) as usize] = p.clone();
            if i < 0 {
                break;
            }
            p = p.matmul(&closed[i as usize]);
            i -= 1;
        }
        table.push(row);
    }
    Ok(TransitionTable {
        n,
        table,
        zero: Matrix::zeros(n, n),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_system(a: &[f64], b: &[f64]) -> LtvSystem<f64> {
        LtvSystem::new(
            a.iter().map(|v| Matrix::from_rows(&[vec![*v]])).collect(),
            b.iter().map(|v| Matrix::from_rows(&[vec![*v]])).collect(),
        )
        .unwrap()
    }

    fn linear(a1: f64, a2: f64) -> Controller<f64> {
        Controller::Linear(LinearFeedback::new(
            Matrix::from_rows(&[vec![a1]]),
            vec![a2],
        ))
    }

    #[test]
    fn zero_dynamics_rollout() {
        let sys = scalar_system(&[1.0], &[1.0]);
        let t = rollout(
            &sys,
            &linear(0.0, 0.0),
            &[0.0],
            &DisturbanceSequence(vec![vec![0.0]]),
        )
        .unwrap();
        assert_eq!(t.states, vec![vec![0.0], vec![0.0]]);
        assert_eq!(t.inputs, vec![vec![0.0]]);
    }

    #[test]
    fn deadbeat_cancels_state() {
        let sys = scalar_system(&[1.0], &[1.0]);
        let t = rollout(
            &sys,
            &linear(-1.0, 0.0),
            &[0.7],
            &DisturbanceSequence(vec![vec![0.3]]),
        )
        .unwrap();
        assert!((t.states[1][0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn rollout_rejects_bad_dimensions() {
        let sys = scalar_system(&[1.0, 1.0], &[1.0, 1.0]);
        let d = DisturbanceSequence(vec![vec![0.0]]);
        assert!(matches!(
            rollout(&sys, &linear(0.0, 0.0), &[0.0], &d),
            Err(ModelError::Dimension(_))
        ));
    }

    #[test]
    fn rollout_reports_overflow_step() {
        let sys = scalar_system(&[1e300, 1e300], &[0.0, 0.0]);
        let d = DisturbanceSequence::zeros(1, 2);
        let err = rollout(&sys, &linear(0.0, 0.0), &[1e10], &d).unwrap_err();
        assert_eq!(err, ModelError::Overflow { step: 1 });
    }

    #[test]
    fn identity_chain_products() {
        let sys =
            LtvSystem::time_invariant(Matrix::<f64>::identity(2), Matrix::identity(2), 3).unwrap();
        let t = closed_loop_products(&sys, Some(&Matrix::zeros(2, 2))).unwrap();
        for k in 1..=3 {
            for i in 0..k as isize {
                assert_eq!(t.get(k, i), &Matrix::identity(2));
            }
        }
        assert_eq!(t.get(0, 0), &Matrix::zeros(2, 2));
        assert_eq!(t.get(0, -1), &Matrix::identity(2));
    }

    #[test]
    fn scalar_products_by_hand() {
        let sys = scalar_system(&[2.0, 3.0], &[1.0, 1.0]);
        let t = closed_loop_products(&sys, Some(&Matrix::from_rows(&[vec![1.0]]))).unwrap();
        assert_eq!(t.get(2, 0)[(0, 0)], 4.0);
        assert_eq!(t.get(2, 1)[(0, 0)], 1.0);
        assert_eq!(t.get(2, -1)[(0, 0)], 12.0);
        let open = closed_loop_products(&sys, None).unwrap();
        assert_eq!(open.get(2, 0)[(0, 0)], 3.0);
        assert_eq!(open.get(2, -1)[(0, 0)], 6.0);
    }

    #[test]
    fn linear_matches_degree_one_polynomial() {
        let lf = LinearFeedback::new(
            Matrix::from_rows(&[vec![0.5, -2.0], vec![1.5, 0.25]]),
            vec![0.1, -0.3],
        );
        let poly = lf.to_polynomial();
        let x = [0.7, -1.3];
        assert_eq!(lf.apply(&x), poly.apply(&x));
    }
}
