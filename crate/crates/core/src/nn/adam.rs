//! Adam optimizer with bias-corrected moments.

use crate::nn::NnError;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Per-parameter first and second moment buffers plus the shared step
/// counter. Buffers are allocated lazily on the first step and locked to
/// the parameter shapes from then on.
#[derive(Clone, Debug)]
pub struct AdamState<T> {
    first_moment: Vec<Vec<T>>,
    second_moment: Vec<Vec<T>>,
    pub step_count: u64,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
}

impl<T: Scalar> Default for AdamState<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> AdamState<T> {
    pub fn new() -> Self {
        AdamState {
            first_moment: Vec::new(),
            second_moment: Vec::new(),
            step_count: 0,
            beta1: T::from_f64(0.9),
            beta2: T::from_f64(0.999),
            epsilon: T::from_f64(1e-8),
        }
    }

    /// One update over aligned parameter and gradient slices. The step
    /// counter is incremented before bias correction, and the correction
    /// is folded into the step size
    /// (`lr_t = lr * sqrt(1 - b2^t) / (1 - b1^t)`).
    pub fn step(
        &mut self,
        params: &mut [&mut Tensor<T>],
        grads: &[&Tensor<T>],
        learning_rate: T,
    ) -> Result<(), NnError> {
        if params.len() != grads.len() {
            return Err(NnError::Shape(format!(
                "{} parameter tensors but {} gradient tensors",
                params.len(),
                grads.len()
            )));
        }
        if self.first_moment.is_empty() {
            self.first_moment = params.iter().map(|p| vec![T::zero(); p.len()]).collect();
            self.second_moment = self.first_moment.clone();
        }
        if self.first_moment.len() != params.len() {
            return Err(NnError::State(format!(
                "optimizer state covers {} tensors but step got {}",
                self.first_moment.len(),
                params.len()
            )));
        }

        self.step_count += 1;
        let t = self.step_count as i32;
        let one = T::one();
        let lr_t = learning_rate * (one - self.beta2.powi(t)).sqrt() / (one - self.beta1.powi(t));

        for ((param, grad), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first_moment.iter_mut().zip(self.second_moment.iter_mut()))
        {
            if param.shape() != grad.shape() {
                return Err(NnError::Shape(format!(
                    "parameter {:?} and gradient {:?} differ in shape",
                    param.shape(),
                    grad.shape()
                )));
            }
            if param.len() != m.len() {
                return Err(NnError::State("optimizer state shape drifted from parameters".into()));
            }
            for ((p, &g), (mi, vi)) in param
                .values_mut()
                .iter_mut()
                .zip(grad.values())
                .zip(m.iter_mut().zip(v.iter_mut()))
            {
                *mi = self.beta1 * *mi + (one - self.beta1) * g;
                *vi = self.beta2 * *vi + (one - self.beta2) * g * g;
                *p = *p - lr_t * *mi / (vi.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}
