//! Numeric abstractions shared by the reward, metrics and policy modules.

use std::fmt::{Debug, Display};

use num_rational::Ratio;
use num_traits::{Float, FromPrimitive, Num, ToPrimitive};

/// Floating point scalar used by the policy-gradient math: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossless-enough conversion from an `f64` constant.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Weight type for reward mixing and metric fractions.
///
/// Implemented for the floats and for `Ratio<i64>`, which gives exact
/// arithmetic when identities have to hold without rounding.
pub trait Weight: Num + Copy + PartialOrd + ToPrimitive + Debug + Send + Sync + 'static {
    /// `num / den` in this representation.
    fn ratio(num: i64, den: i64) -> Self;
}

impl Weight for f64 {
    fn ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }
}

impl Weight for f32 {
    fn ratio(num: i64, den: i64) -> Self {
        num as f32 / den as f32
    }
}

impl Weight for Ratio<i64> {
    fn ratio(num: i64, den: i64) -> Self {
        Ratio::new(num, den)
    }
}

/// Exact rational used for identity checks.
pub type Exact = Ratio<i64>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_is_exact() {
        let a = Exact::ratio(3, 10);
        let b = Exact::ratio(7, 10);
        assert_eq!(a + b, Exact::from_integer(1));
        assert_eq!(f64::ratio(1, 4), 0.25);
    }
}
