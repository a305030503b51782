//! Floating-point abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumCast};

/// Real scalar the solvers are generic over: `f32` or `f64`.
///
/// The tolerance constants scale with the precision of the type so that the
/// same algorithm behaves sensibly in single precision.
pub trait Scalar:
    Float + FromPrimitive + NumCast + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Smallest pivot magnitude accepted by the simplex method.
    const PIVOT_TOL: Self;
    /// Primal feasibility tolerance of the simplex method.
    const FEAS_TOL: Self;
    /// Absolute slack accepted by the vertex certifier.
    const CERT_TOL: Self;

    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn of(value: f64) -> Self {
        <Self as NumCast>::from(value).expect("f64 is representable in every Scalar")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    const PIVOT_TOL: Self = 1e-9;
    const FEAS_TOL: Self = 1e-8;
    const CERT_TOL: Self = 1e-9;
}

impl Scalar for f32 {
    const PIVOT_TOL: Self = 1e-5;
    const FEAS_TOL: Self = 1e-4;
    const CERT_TOL: Self = 1e-4;
}

/// Infinity norm of a vector; zero for the empty vector.
pub fn inf_norm<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, x| acc.max(x.abs()))
}

pub fn l1_norm<T: Scalar>(v: &[T]) -> T {
    v.iter().map(|x| x.abs()).sum()
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

pub fn all_finite<T: Scalar>(v: &[T]) -> bool {
    v.iter().all(|x| x.is_finite())
}
