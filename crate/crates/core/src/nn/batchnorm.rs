//! 1D batch normalization over `(batch, channels, len)` inputs.

use crate::nn::NnError;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Per-channel normalization. Train mode normalizes by batch statistics
/// computed over `(batch, len)` and updates the running estimates; eval
/// mode is a pure affine map through the running statistics.
#[derive(Clone, Debug)]
pub struct BatchNorm1dLayer<T> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
    pub momentum: T,
    pub epsilon: T,
}

/// Batch statistics recorded by a train-mode forward pass.
pub struct BnCache<T> {
    pub mean: Vec<T>,
    pub inv_std: Vec<T>,
}

pub struct BnGrads<T> {
    pub input: Tensor<T>,
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
}

impl<T: Scalar> BatchNorm1dLayer<T> {
    pub fn new(channels: usize, momentum: T, epsilon: T) -> Self {
        BatchNorm1dLayer {
            gamma: Tensor::filled(&[channels], T::one()),
            beta: Tensor::zeros(&[channels]),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::filled(&[channels], T::one()),
            momentum,
            epsilon,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.dim(0)
    }

    fn check_input(&self, input: &Tensor<T>) -> Result<(), NnError> {
        if input.rank() != 3 || input.dim(1) != self.channels() {
            return Err(NnError::Shape(format!(
                "batchnorm1d expects (batch, {}, len), got {:?}",
                self.channels(),
                input.shape()
            )));
        }
        Ok(())
    }

    /// Normalizes by batch statistics and updates the running estimates
    /// (`running = (1 - momentum) * running + momentum * batch`, with the
    /// unbiased variance feeding the running buffer).
    pub fn forward_train(&mut self, input: &Tensor<T>) -> Result<(Tensor<T>, BnCache<T>), NnError> {
        self.check_input(input)?;
        let (batch, channels, len) = (input.dim(0), input.dim(1), input.dim(2));
        let n = batch * len;
        if n < 2 {
            return Err(NnError::DegenerateBatch);
        }
        let n_t = T::from_f64(n as f64);

        let mut mean = vec![T::zero(); channels];
        let mut inv_std = vec![T::zero(); channels];
        let mut out = Tensor::zeros(input.shape());

        for c in 0..channels {
            let mut sum = T::zero();
            for b in 0..batch {
                sum = sum + input.row3(b, c).iter().copied().sum();
            }
            let mu = sum / n_t;

            let mut sq = T::zero();
            for b in 0..batch {
                for &v in input.row3(b, c) {
                    let d = v - mu;
                    sq = sq + d * d;
                }
            }
            let var = sq / n_t;
            let istd = T::one() / (var + self.epsilon).sqrt();
            mean[c] = mu;
            inv_std[c] = istd;

            let gamma = self.gamma.values()[c];
            let beta = self.beta.values()[c];
            for b in 0..batch {
                let src = input.row3(b, c).to_vec();
                let dst = out.row3_mut(b, c);
                for (o, v) in dst.iter_mut().zip(src) {
                    *o = gamma * (v - mu) * istd + beta;
                }
            }

            let one = T::one();
            let unbiased = var * n_t / (n_t - one);
            let rm = self.running_mean.values_mut();
            rm[c] = (one - self.momentum) * rm[c] + self.momentum * mu;
            let rv = self.running_var.values_mut();
            rv[c] = (one - self.momentum) * rv[c] + self.momentum * unbiased;
        }
        Ok((out, BnCache { mean, inv_std }))
    }

    /// Pure per-element affine map through the running statistics.
    pub fn forward_eval(&self, input: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        self.check_input(input)?;
        let (batch, channels, _) = (input.dim(0), input.dim(1), input.dim(2));
        let mut out = Tensor::zeros(input.shape());
        for c in 0..channels {
            let mu = self.running_mean.values()[c];
            let istd = T::one() / (self.running_var.values()[c] + self.epsilon).sqrt();
            let gamma = self.gamma.values()[c];
            let beta = self.beta.values()[c];
            for b in 0..batch {
                let src = input.row3(b, c).to_vec();
                let dst = out.row3_mut(b, c);
                for (o, v) in dst.iter_mut().zip(src) {
                    *o = gamma * (v - mu) * istd + beta;
                }
            }
        }
        Ok(out)
    }

    /// Train-mode gradients for the forward call that produced `cache`.
    pub fn backward(
        &self,
        input: &Tensor<T>,
        cache: &BnCache<T>,
        upstream: &Tensor<T>,
    ) -> Result<BnGrads<T>, NnError> {
        self.check_input(input)?;
        if upstream.shape() != input.shape() {
            return Err(NnError::Shape(format!(
                "batchnorm backward upstream {:?} does not match input {:?}",
                upstream.shape(),
                input.shape()
            )));
        }
        if cache.mean.len() != self.channels() {
            return Err(NnError::State("batchnorm cache does not match layer width".into()));
        }
        let (batch, channels, len) = (input.dim(0), input.dim(1), input.dim(2));
        let n = batch * len;
        let n_t = T::from_f64(n as f64);
        let two = T::from_f64(2.0);
        let half = T::from_f64(0.5);

        let mut d_input = Tensor::zeros(input.shape());
        let mut d_gamma = Tensor::zeros(&[channels]);
        let mut d_beta = Tensor::zeros(&[channels]);

        for c in 0..channels {
            let mu = cache.mean[c];
            let istd = cache.inv_std[c];
            let gamma = self.gamma.values()[c];

            let mut sum_g = T::zero();
            let mut sum_g_xhat = T::zero();
            let mut sum_centered = T::zero();
            for b in 0..batch {
                for (&x, &g) in input.row3(b, c).iter().zip(upstream.row3(b, c)) {
                    let centered = x - mu;
                    sum_g = sum_g + g;
                    sum_g_xhat = sum_g_xhat + g * centered * istd;
                    sum_centered = sum_centered + centered;
                }
            }
            d_gamma.values_mut()[c] = sum_g_xhat;
            d_beta.values_mut()[c] = sum_g;

            // dL/dvar and dL/dmean with dxhat = g * gamma; note
            // sum_g_xhat / istd equals the sum of g * (x - mu).
            let sum_dxhat_centered = gamma * sum_g_xhat / istd;
            let d_var = -half * istd * istd * istd * sum_dxhat_centered;
            let d_mean = -istd * gamma * sum_g + d_var * (-two / n_t) * sum_centered;

            for b in 0..batch {
                let x_row = input.row3(b, c).to_vec();
                let g_row = upstream.row3(b, c).to_vec();
                let dst = d_input.row3_mut(b, c);
                for ((o, x), g) in dst.iter_mut().zip(x_row).zip(g_row) {
                    let centered = x - mu;
                    *o = g * gamma * istd + d_var * two * centered / n_t + d_mean / n_t;
                }
            }
        }
        Ok(BnGrads {
            input: d_input,
            gamma: d_gamma,
            beta: d_beta,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{central_diff_grad, max_rel_error};

    fn layer(channels: usize) -> BatchNorm1dLayer<f64> {
        BatchNorm1dLayer::new(channels, 0.1, 1e-5)
    }

    #[test]
    fn train_mode_normalizes_each_channel() {
        let mut bn = layer(2);
        let x = Tensor::from_fn(&[2, 2, 8], |i| (i as f64 * 0.37).sin() + i as f64 * 0.01);
        let (y, _) = bn.forward_train(&x).unwrap();
        for c in 0..2 {
            let vals: Vec<f64> = (0..2).flat_map(|b| y.row3(b, c).to_vec()).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64;
            assert!(mean.abs() < 1e-6, "channel {c} mean {mean}");
            assert!((var - 1.0).abs() < 1e-4, "channel {c} var {var}");
        }
    }

    #[test]
    fn eval_mode_with_unit_running_stats_is_near_identity() {
        let bn = layer(1);
        let x = Tensor::from_values(&[1, 1, 4], vec![0.5, -1.0, 2.0, 0.25]);
        let y = bn.forward_eval(&x).unwrap();
        let scale = 1.0 / (1.0f64 + 1e-5).sqrt();
        for (yo, xo) in y.iter().zip(x.iter()) {
            assert!((yo - xo * scale).abs() < 1e-12);
        }
    }

    #[test]
    fn single_element_channel_is_degenerate_in_train_mode() {
        let mut bn = layer(3);
        let x = Tensor::<f64>::zeros(&[1, 3, 1]);
        assert!(matches!(bn.forward_train(&x), Err(NnError::DegenerateBatch)));
    }

    #[test]
    fn running_stats_move_toward_batch_stats() {
        let mut bn = layer(1);
        let x = Tensor::from_values(&[1, 1, 4], vec![2.0, 2.0, 6.0, 6.0]);
        bn.forward_train(&x).unwrap();
        // batch mean 4, biased var 4, unbiased var 16/3.
        assert!((bn.running_mean.values()[0] - 0.4).abs() < 1e-12);
        assert!((bn.running_var.values()[0] - (0.9 + 0.1 * 16.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let x0: Vec<f64> = (0..2 * 2 * 5).map(|i| ((i * 29 % 13) as f64 - 6.0) / 3.5).collect();
        let up: Vec<f64> = (0..2 * 2 * 5).map(|i| ((i * 11 % 7) as f64 - 3.0) / 4.0).collect();
        let gamma0 = vec![1.2, 0.7];
        let beta0 = vec![0.1, -0.3];

        let loss = |xv: &[f64], gv: &[f64], bv: &[f64]| -> f64 {
            let mut bn = layer(2);
            bn.gamma = Tensor::from_values(&[2], gv.to_vec());
            bn.beta = Tensor::from_values(&[2], bv.to_vec());
            let (y, _) = bn
                .forward_train(&Tensor::from_values(&[2, 2, 5], xv.to_vec()))
                .unwrap();
            y.iter().zip(&up).map(|(&o, g)| o * g).sum()
        };

        let mut bn = layer(2);
        bn.gamma = Tensor::from_values(&[2], gamma0.clone());
        bn.beta = Tensor::from_values(&[2], beta0.clone());
        let x = Tensor::from_values(&[2, 2, 5], x0.clone());
        let (_, cache) = bn.forward_train(&x).unwrap();
        let grads = bn
            .backward(&x, &cache, &Tensor::from_values(&[2, 2, 5], up.clone()))
            .unwrap();

        let gx = central_diff_grad(|v| loss(v, &gamma0, &beta0), &x0, 1e-3);
        let gg = central_diff_grad(|v| loss(&x0, v, &beta0), &gamma0, 1e-3);
        let gb = central_diff_grad(|v| loss(&x0, &gamma0, v), &beta0, 1e-3);
        assert!(max_rel_error(grads.input.values(), &gx) < 1e-4);
        assert!(max_rel_error(grads.gamma.values(), &gg) < 1e-4);
        assert!(max_rel_error(grads.beta.values(), &gb) < 1e-4);
    }
}
