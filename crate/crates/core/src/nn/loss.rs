//! Binary cross-entropy over probabilities.

use crate::nn::NnError;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Mean of `-[y ln p + (1 - y) ln(1 - p)]` with probabilities clamped to
/// `[1e-7, 1 - 1e-7]`, and its gradient with respect to the (unclamped)
/// probabilities. Where the clamp is active the loss is locally constant,
/// so the gradient there is zero.
pub fn bce_loss<T: Scalar>(probabilities: &Tensor<T>, targets: &Tensor<T>) -> Result<(T, Tensor<T>), NnError> {
    if probabilities.shape() != targets.shape() {
        return Err(NnError::Shape(format!(
            "probabilities {:?} and targets {:?} differ in shape",
            probabilities.shape(),
            targets.shape()
        )));
    }
    if probabilities.is_empty() {
        return Err(NnError::Shape("empty batch".into()));
    }
    let lo = T::from_f64(1e-7);
    let hi = T::one() - lo;
    let n = T::from_f64(probabilities.len() as f64);

    let mut total = T::zero();
    let mut grad = Tensor::zeros(probabilities.shape());
    for (i, (&p, &y)) in probabilities.iter().zip(targets.iter()).enumerate() {
        if y != T::zero() && y != T::one() {
            return Err(NnError::Label(y.to_f64()));
        }
        let clamped = p.max(lo).min(hi);
        total = total - (y * clamped.ln() + (T::one() - y) * (T::one() - clamped).ln());
        if p > lo && p < hi {
            grad.values_mut()[i] = (clamped - y) / (clamped * (T::one() - clamped) * n);
        }
    }
    Ok((total / n, grad))
}
