use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point element type used by the numeric parts of the crate.
///
/// Implemented for `f32` and `f64`; the concrete aliases exported from the
/// crate root pick `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` constant, panicking only if the target type cannot
    /// represent finite values (never the case for `f32`/`f64`).
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Scalar for T where
    T: Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
}

/// Compensated (Neumaier) summation.
pub fn stable_sum<S: Scalar>(values: impl IntoIterator<Item = S>) -> S {
    let mut sum = S::zero();
    let mut comp = S::zero();
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Arithmetic mean with compensated summation; zero for an empty slice.
pub fn stable_mean<S: Scalar>(values: &[S]) -> S {
    if values.is_empty() {
        return S::zero();
    }
    stable_sum(values.iter().copied()) / S::of(values.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let v = [1e16_f64, 1.0, -1e16, 1.0];
        assert_eq!(stable_sum(v), 2.0);
    }

    #[test]
    fn mean_of_empty_is_zero() {
        assert_eq!(stable_mean::<f32>(&[]), 0.0);
        assert_eq!(stable_mean(&[1.0_f64, 2.0, 3.0]), 2.0);
    }
}
