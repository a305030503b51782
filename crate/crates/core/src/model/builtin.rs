//! Named nonlinear plants that problem files can refer to.
//!
//! * `acc`: adaptive cruise control, state `(h, v)`, input traction force `F`.
//!   Parameters `mass, f0, f1, f2, v0, tau`.
//! * `collision`: intersection crossing, state `(r_x, r_y, v)`, input `F`.
//!   Parameters `mass, f1, f2, v_lead, tau`.
//!
//! [`GeneratorParams`] builds the linearized synchronous generator, which is
//! linear time-varying rather than nonlinear.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::{LtvSystem, ModelError, NonlinearSystem};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

pub const MODEL_NAMES: &[&str] = &["acc", "collision"];

fn param(model: &str, params: &BTreeMap<String, f64>, key: &str) -> Result<f64, ModelError> {
    params
        .get(key)
        .copied()
        .ok_or_else(|| ModelError::MissingParameter {
            model: model.into(),
            param: key.into(),
        })
}

/// Adaptive cruise control parameters. Units: kg, N, N·s/m, N·s²/m², m/s, s.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AccParams {
    pub mass: f64,
    pub f0: f64,
    pub f1: f64,
    pub f2: f64,
    pub v0: f64,
    pub tau: f64,
}

impl AccParams {
    pub fn from_map(params: &BTreeMap<String, f64>) -> Result<Self, ModelError> {
        let p = |k| param("acc", params, k);
        Ok(Self {
            mass: p("mass")?,
            f0: p("f0")?,
            f1: p("f1")?,
            f2: p("f2")?,
            v0: p("v0")?,
            tau: p("tau")?,
        })
    }

    /// Nominal step: `h⁺ = h + τ(v₀ − v)`, `v⁺ = v + τ/m (F − f₀ − f₁v − f₂v²)`.
    pub fn step<T: Scalar>(&self, x: &[T], u: &[T]) -> Vec<T> {
        let (h, v, force) = (x[0], x[1], u[0]);
        let tau = T::of(self.tau);
        let resist = T::of(self.f0) + T::of(self.f1) * v + T::of(self.f2) * v * v;
        vec![
            h + tau * (T::of(self.v0) - v),
            v + tau / T::of(self.mass) * (force - resist),
        ]
    }

    pub fn system<T: Scalar>(self, horizon: usize) -> Result<NonlinearSystem<T>, ModelError> {
        NonlinearSystem::new(
            "acc",
            2,
            1,
            horizon,
            Arc::new(move |_k, x: &[T], u: &[T]| self.step(x, u)),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollisionParams {
    pub mass: f64,
    pub f1: f64,
    pub f2: f64,
    pub v_lead: f64,
    pub tau: f64,
}

impl CollisionParams {
    pub fn from_map(params: &BTreeMap<String, f64>) -> Result<Self, ModelError> {
        let p = |k| param("collision", params, k);
        Ok(Self {
            mass: p("mass")?,
            f1: p("f1")?,
            f2: p("f2")?,
            v_lead: p("v_lead")?,
            tau: p("tau")?,
        })
    }

    pub fn step<T: Scalar>(&self, x: &[T], u: &[T]) -> Vec<T> {
        let (rx, ry, v, force) = (x[0], x[1], x[2], u[0]);
        let tau = T::of(self.tau);
        let resist = T::of(self.f1) * v + T::of(self.f2) * v * v;
        vec![
            rx - tau * T::of(self.v_lead),
            ry + tau * v,
            v + tau / T::of(self.mass) * (force - resist),
        ]
    }

    pub fn system<T: Scalar>(self, horizon: usize) -> Result<NonlinearSystem<T>, ModelError> {
        NonlinearSystem::new(
            "collision",
            3,
            1,
            horizon,
            Arc::new(move |_k, x: &[T], u: &[T]| self.step(x, u)),
        )
    }
}

/// Sampled swing dynamics of a synchronous generator with voltage regulator:
/// state `(δ, ω, e_fd)`, inputs (torque command, AVR reference), stiffness
/// `K_p(k) = kp0 + kp_slope·k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneratorParams {
    pub inertia: f64,
    pub damping: f64,
    pub kf: f64,
    pub ts: f64,
    pub te: f64,
    pub kp0: f64,
    pub kp_slope: f64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            inertia: 3.0,
            damping: 0.5,
            kf: 0.8,
            ts: 0.5,
            te: 0.4,
            kp0: 2.0,
            kp_slope: -0.05,
        }
    }
}

impl GeneratorParams {
    pub fn a<T: Scalar>(&self, k: usize) -> Matrix<T> {
        let Self {
            inertia: h,
            damping: d,
            kf,
            ts,
            te,
            kp0,
            kp_slope,
        } = *self;
        let kp = kp0 + kp_slope * k as f64;
        Matrix::from_rows(&[
            vec![1.0, ts, 0.0],
            vec![
                -ts * kp / (2.0 * h),
                1.0 - ts * d / (2.0 * h),
                -ts * kf / (2.0 * h),
            ],
            vec![0.0, 0.0, 1.0 - ts / te],
        ])
        .map(T::of)
    }

    pub fn b<T: Scalar>(&self) -> Matrix<T> {
        Matrix::from_rows(&[
            vec![0.0, 0.0],
            vec![self.ts / (2.0 * self.inertia), 0.0],
            vec![0.0, self.ts / self.te],
        ])
        .map(T::of)
    }

    pub fn system<T: Scalar>(&self, horizon: usize) -> Result<LtvSystem<T>, ModelError> {
        LtvSystem::new(
            (0..horizon).map(|k| self.a(k)).collect(),
            vec![self.b(); horizon],
        )
    }
}

/// Looks up a model by name and instantiates it with `params`.
pub fn build<T: Scalar>(
    name: &str,
    params: &BTreeMap<String, f64>,
    horizon: usize,
) -> Result<NonlinearSystem<T>, ModelError> {
    match name {
        "acc" => AccParams::from_map(params)?.system(horizon),
        "collision" => CollisionParams::from_map(params)?.system(horizon),
        other => Err(ModelError::UnknownModel(other.into())),
    }
}
