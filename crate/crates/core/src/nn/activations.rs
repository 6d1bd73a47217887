//! Elementwise activations and their backward passes.

use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// `x` for positive inputs, `slope * x` otherwise.
pub fn leaky_relu<T: Scalar>(input: &Tensor<T>, slope: T) -> Tensor<T> {
    input.map(|x| if x > T::zero() { x } else { slope * x })
}

/// Multiplies the upstream gradient by 1 where the input was positive and
/// by `slope` elsewhere (the kink at exactly zero uses `slope`).
pub fn leaky_relu_backward<T: Scalar>(input: &Tensor<T>, upstream: &Tensor<T>, slope: T) -> Tensor<T> {
    assert_eq!(input.shape(), upstream.shape());
    let values = input
        .iter()
        .zip(upstream.iter())
        .map(|(&x, &g)| if x > T::zero() { g } else { slope * g })
        .collect();
    Tensor::from_values(input.shape(), values)
}

pub fn relu<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|x| if x > T::zero() { x } else { T::zero() })
}

pub fn relu_backward<T: Scalar>(input: &Tensor<T>, upstream: &Tensor<T>) -> Tensor<T> {
    assert_eq!(input.shape(), upstream.shape());
    let values = input
        .iter()
        .zip(upstream.iter())
        .map(|(&x, &g)| if x > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::from_values(input.shape(), values)
}

/// Numerically stable logistic function: never overflows, saturates to
/// exactly 0/1 only in the limit of the floating-point format.
pub fn sigmoid<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    input.map(sigmoid_scalar)
}

#[inline]
pub fn sigmoid_scalar<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Backward pass from the cached *output* of [`sigmoid`]: `g * y * (1 - y)`.
pub fn sigmoid_backward<T: Scalar>(output: &Tensor<T>, upstream: &Tensor<T>) -> Tensor<T> {
    assert_eq!(output.shape(), upstream.shape());
    let values = output
        .iter()
        .zip(upstream.iter())
        .map(|(&y, &g)| g * y * (T::one() - y))
        .collect();
    Tensor::from_values(output.shape(), values)
}

#[inline]
pub fn tanh_scalar<T: Scalar>(x: T) -> T {
    x.tanh()
}
