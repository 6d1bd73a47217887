//! Scalar abstraction for the numeric kernels.
//!
//! Everything numerical in this crate (DSP, features, network layers) is
//! generic over [`Scalar`] so the production pipeline can run in `f32`
//! while the finite-difference test harnesses run the exact same code
//! paths in `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, NumAssignOps};

pub trait Scalar:
    Float + NumAssignOps + Sum<Self> + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from `f64`, used for constants and filter designs
    /// that are always derived in double precision.
    fn from_f64(v: f64) -> Self;

    /// Widen to `f64` for reporting and serialization.
    fn to_f64(self) -> f64;
}

impl Scalar for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }

    fn to_f64(self) -> f64 {
        f64::from(self)
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }

    fn to_f64(self) -> f64 {
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sum_generic<T: Scalar>(values: &[T]) -> T {
        values.iter().copied().sum()
    }

    #[test]
    fn both_widths_satisfy_the_trait() {
        assert_eq!(sum_generic(&[1.0f32, 2.0, 3.0]), 6.0);
        assert_eq!(sum_generic(&[1.0f64, 2.0, 3.0]), 6.0);
        assert_eq!(f32::from_f64(0.5).to_f64(), 0.5);
    }
}
