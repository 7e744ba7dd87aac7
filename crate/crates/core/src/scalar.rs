//! Floating-point scalar abstraction.
//!
//! All numerical code in this crate is written against [`Scalar`], which is
//! implemented for `f32` and `f64`. The linear algebra comes from `nalgebra`,
//! so the bound is built on [`nalgebra::RealField`]; `num_traits::Float` is
//! deliberately not part of the bound because its methods shadow the
//! `RealField` ones and make every `x.sqrt()` ambiguous.

use nalgebra::RealField;
use num_traits::ToPrimitive;
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Real scalar type the estimation engine is generic over.
pub trait Scalar:
    RealField + Copy + ToPrimitive + Debug + Display + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal into this type (rounding for `f32`).
    fn lit(v: f64) -> Self;

    /// Lossy conversion to `f64`.
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Largest finite value.
    fn max_finite() -> Self;

    /// Machine epsilon.
    fn eps() -> Self;
}

impl Scalar for f64 {
    #[inline]
    fn lit(v: f64) -> Self {
        v
    }
    fn max_finite() -> Self {
        f64::MAX
    }
    fn eps() -> Self {
        f64::EPSILON
    }
}

impl Scalar for f32 {
    #[inline]
    fn lit(v: f64) -> Self {
        v as f32
    }
    fn max_finite() -> Self {
        f32::MAX
    }
    fn eps() -> Self {
        f32::EPSILON
    }
}

/// Numerically stable `log(sum(exp(values)))`.
pub fn log_sum_exp<T: Scalar>(values: &[T]) -> T {
    let mut max = T::lit(f64::NEG_INFINITY);
    for &v in values {
        if v > max {
            max = v;
        }
    }
    if !max.is_finite() {
        return max;
    }
    let mut acc = T::lit(0.0);
    for &v in values {
        acc += (v - max).exp();
    }
    max + acc.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_handles_large_magnitudes() {
        let v = [-1000.0_f64, -1000.0];
        assert!((log_sum_exp(&v) - (-1000.0 + 2f64.ln())).abs() < 1e-12);
        let w = [f64::NEG_INFINITY, 0.0];
        assert_eq!(log_sum_exp(&w), 0.0);
        assert_eq!(log_sum_exp::<f64>(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn literals_round_trip() {
        assert_eq!(<f32 as Scalar>::lit(0.5), 0.5f32);
        assert_eq!(<f64 as Scalar>::lit(0.1).as_f64(), 0.1);
    }
}
