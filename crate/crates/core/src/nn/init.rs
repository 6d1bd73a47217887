//! Seeded Glorot (Xavier) uniform initialization.

use rand::Rng;

use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Uniform samples in `±sqrt(6 / (fan_in + fan_out))`, drawn in `f64` from
/// the caller's seeded generator and narrowed to `T`.
pub fn glorot_uniform<T: Scalar>(
    shape: &[usize],
    fan_in: usize,
    fan_out: usize,
    rng: &mut impl Rng,
) -> Tensor<T> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Tensor::from_fn(shape, |_| {
        let u: f64 = rng.random();
        T::from_f64((2.0 * u - 1.0) * bound)
    })
}

pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn same_seed_same_tensor() {
        let a: Tensor<f32> = glorot_uniform(&[8, 4], 4, 8, &mut ChaCha8Rng::seed_from_u64(7));
        let b: Tensor<f32> = glorot_uniform(&[8, 4], 4, 8, &mut ChaCha8Rng::seed_from_u64(7));
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn values_stay_inside_the_bound() {
        let bound = glorot_bound(100, 100);
        let t: Tensor<f64> = glorot_uniform(&[100, 100], 100, 100, &mut ChaCha8Rng::seed_from_u64(3));
        assert!(t.iter().all(|v| v.abs() <= bound));
    }

    #[test]
    fn sample_mean_is_near_zero() {
        // Standard error of the mean for U(-a, a) over n samples is
        // a / sqrt(3 n); the mean must land within three of them.
        let n = 10_000usize;
        let bound = glorot_bound(50, 200);
        let t: Tensor<f64> = glorot_uniform(&[n], 50, 200, &mut ChaCha8Rng::seed_from_u64(11));
        let mean = t.iter().sum::<f64>() / n as f64;
        let se = bound / (3.0 * n as f64).sqrt();
        assert!(mean.abs() < 3.0 * se, "mean {mean} exceeds 3 standard errors {se}");
    }
}
