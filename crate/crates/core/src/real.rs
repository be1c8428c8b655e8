//! Scalar abstraction. Every field computation is generic over an IEEE
//! float; `f64` is the working type everywhere and `f32` is available for
//! smoke-testing at correspondingly looser tolerances.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, Signed, ToPrimitive};

/// Floating scalar the crate is generic over.
///
/// The bound set is exactly what the FFT backend's blanket `FftNum`
/// implementation requires, plus constants and conversions.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Signed
    + Sum<Self>
    + Send
    + Sync
    + Debug
    + Display
    + LowerExp
    + 'static
{
    /// Literal conversion; `f64` literals are the source of truth for all
    /// tolerances and coefficients.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Compensated (Kahan) sum. Quadrature and norm accumulations over up to
/// 2^18 cells must stay well under the 1e-10 comparison tolerances.
pub(crate) fn kahan_sum<T: Real>(values: impl IntoIterator<Item = T>) -> T {
    let mut sum = T::zero();
    let mut carry = T::zero();
    for v in values {
        let y = v - carry;
        let t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_beats_naive_on_mixed_magnitudes() {
        let xs: Vec<f64> = (0..100_000).map(|i| 1.0 + 1e-14 * i as f64).collect();
        let exact = 100_000.0 + 1e-14 * (99_999.0 * 100_000.0 / 2.0);
        let k: f64 = kahan_sum(xs.iter().copied());
        assert!((k - exact).abs() < 1e-9);
    }

    #[test]
    fn conversions_round_trip() {
        assert_eq!(f64::of(0.125), 0.125);
        assert_eq!(f32::of(0.125), 0.125_f32);
        assert_eq!(f64::of_usize(256), 256.0);
        assert_eq!(1.5_f64.as_f64(), 1.5);
    }
}
