//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
///
/// Tolerances quoted throughout the crate assume `f64`; the `f32`
/// instantiation is supported for the forward model and the measure
/// algebra but is not expected to meet double-precision thresholds.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("count representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// Largest argument accepted by `exp` without overflow, with margin.
    fn exp_limit() -> Self;
}

impl Real for f32 {
    fn exp_limit() -> Self {
        80.0
    }
}

impl Real for f64 {
    fn exp_limit() -> Self {
        600.0
    }
}

/// Pairwise (tree) summation with a fixed split rule, so the result depends
/// only on the slice contents and never on scheduling.
pub fn pairwise_sum<R: Real>(values: &[R]) -> R {
    const LEAF: usize = 32;
    if values.len() <= LEAF {
        let mut acc = R::zero();
        for &v in values {
            acc += v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}
