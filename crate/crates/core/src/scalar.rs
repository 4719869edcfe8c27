//! Scalar abstraction shared by every numerical kernel in the crate.

use nalgebra::RealField;
use num_traits::{FloatConst, FromPrimitive};

/// Floating point scalar usable by the quadrature, operator and solver code.
///
/// Implemented for `f32` and `f64`. Tolerances used throughout the crate are
/// chosen for binary64; `f32` instantiations are useful for smoke tests and
/// low-precision evaluation only.
pub trait Real: RealField + Copy + FromPrimitive + FloatConst + Send + Sync + 'static {
    /// Converts an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    /// Lossy conversion used for reporting and random-number plumbing.
    fn as_f64(self) -> f64;

    /// Machine epsilon of the underlying type.
    fn epsilon() -> Self;
}

impl Real for f64 {
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }

    #[inline]
    fn epsilon() -> Self {
        f64::EPSILON
    }
}

impl Real for f32 {
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }

    #[inline]
    fn epsilon() -> Self {
        f32::EPSILON
    }
}

/// Max-norm of a slice.
pub(crate) fn max_abs<T: Real>(xs: impl IntoIterator<Item = T>) -> T {
    xs.into_iter().fold(T::zero(), |m, x| m.max(x.abs()))
}
