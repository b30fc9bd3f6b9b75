//! Scalar abstraction shared by the numerical kernels.
//!
//! Everything that is pure arithmetic (operator algebra, closed-form couplings,
//! thermal occupations, strip electrostatics) is written against [`Real`], so the
//! same code runs in `f64` (the default everywhere) and `f32`.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point scalar usable by the crate.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive {
    /// Relative tolerance for checks that are exact up to rounding
    /// (Hermiticity, probability conservation).
    fn exact_tol() -> Self;
}

impl Real for f64 {
    fn exact_tol() -> Self {
        1e-12
    }
}

impl Real for f32 {
    fn exact_tol() -> Self {
        // 1e-12 is below f32 resolution; scale with the machine epsilon instead.
        1e3 * f32::EPSILON
    }
}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}

/// Converts `x` to `f64` for reporting.
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}
