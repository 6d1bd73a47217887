//! Sigmoid-mask attention over the concatenated stream features: squeeze
//! to a bottleneck with ReLU, expand back with a sigmoid, and gate the
//! concatenation elementwise with the resulting mask.

use rand::Rng;

use crate::model::ModelError;
use crate::nn::{relu, relu_backward, sigmoid, sigmoid_backward, DenseLayer};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub struct AttentionFusion<T> {
    pub squeeze: DenseLayer<T>,
    pub expand: DenseLayer<T>,
}

pub struct FusionCache<T> {
    concat: Tensor<T>,
    squeeze_pre: Tensor<T>,
    bottleneck: Tensor<T>,
    pub mask: Tensor<T>,
}

impl<T: Scalar> AttentionFusion<T> {
    pub fn new(concat_width: usize, bottleneck: usize, rng: &mut impl Rng) -> Self {
        AttentionFusion {
            squeeze: DenseLayer::glorot(bottleneck, concat_width, rng),
            expand: DenseLayer::glorot(concat_width, bottleneck, rng),
        }
    }

    /// Gates the concatenated features: returns `mask * concat` and the
    /// cache (which carries the mask itself for inspection).
    pub fn forward(&self, concat: &Tensor<T>) -> Result<(Tensor<T>, FusionCache<T>), ModelError> {
        let squeeze_pre = self.squeeze.forward(concat)?;
        let bottleneck = relu(&squeeze_pre);
        let expand_pre = self.expand.forward(&bottleneck)?;
        let mask = sigmoid(&expand_pre);
        let gated_values = mask
            .iter()
            .zip(concat.iter())
            .map(|(&m, &c)| m * c)
            .collect();
        let gated = Tensor::from_values(concat.shape(), gated_values);
        Ok((
            gated,
            FusionCache {
                concat: concat.clone(),
                squeeze_pre,
                bottleneck,
                mask,
            },
        ))
    }

    /// Gradients: returns `(d_concat, [squeeze.w, squeeze.b, expand.w, expand.b])`.
    pub fn backward(
        &self,
        cache: &FusionCache<T>,
        d_gated: &Tensor<T>,
    ) -> Result<(Tensor<T>, Vec<Tensor<T>>), ModelError> {
        let d_mask_values: Vec<T> = d_gated
            .iter()
            .zip(cache.concat.iter())
            .map(|(&g, &c)| g * c)
            .collect();
        let d_mask = Tensor::from_values(d_gated.shape(), d_mask_values);
        let d_expand_pre = sigmoid_backward(&cache.mask, &d_mask);
        let expand_grads = self.expand.backward(&cache.bottleneck, &d_expand_pre)?;
        let d_squeeze_pre = relu_backward(&cache.squeeze_pre, &expand_grads.input);
        let squeeze_grads = self.squeeze.backward(&cache.concat, &d_squeeze_pre)?;

        let mut d_concat = squeeze_grads.input;
        for ((dc, &g), &m) in d_concat
            .values_mut()
            .iter_mut()
            .zip(d_gated.iter())
            .zip(cache.mask.iter())
        {
            *dc = *dc + g * m;
        }
        Ok((
            d_concat,
            vec![squeeze_grads.weights, squeeze_grads.bias, expand_grads.weights, expand_grads.bias],
        ))
    }

    pub fn param_names(prefix: &str, out: &mut Vec<String>) {
        out.push(format!("{prefix}.squeeze.weight"));
        out.push(format!("{prefix}.squeeze.bias"));
        out.push(format!("{prefix}.expand.weight"));
        out.push(format!("{prefix}.expand.bias"));
    }

    pub fn params(&self) -> Vec<&Tensor<T>> {
        vec![&self.squeeze.weights, &self.squeeze.bias, &self.expand.weights, &self.expand.bias]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        vec![
            &mut self.squeeze.weights,
            &mut self.squeeze.bias,
            &mut self.expand.weights,
            &mut self.expand.bias,
        ]
    }
}

/// Classification head shared by every variant: a ReLU hidden layer and a
/// single sigmoid output unit.
pub struct ClassifierHead<T> {
    pub hidden: DenseLayer<T>,
    pub output: DenseLayer<T>,
}

pub struct HeadCache<T> {
    input: Tensor<T>,
    hidden_pre: Tensor<T>,
    hidden_out: Tensor<T>,
    probs: Tensor<T>,
}

impl<T: Scalar> ClassifierHead<T> {
    pub fn new(in_features: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        ClassifierHead {
            hidden: DenseLayer::glorot(hidden, in_features, rng),
            output: DenseLayer::glorot(1, hidden, rng),
        }
    }

    /// `(batch, features) -> (batch,)` probabilities.
    pub fn forward(&self, input: &Tensor<T>) -> Result<(Tensor<T>, HeadCache<T>), ModelError> {
        let hidden_pre = self.hidden.forward(input)?;
        let hidden_out = relu(&hidden_pre);
        let out_pre = self.output.forward(&hidden_out)?;
        let probs = sigmoid(&out_pre).reshaped(&[input.dim(0)]);
        Ok((
            probs.clone(),
            HeadCache {
                input: input.clone(),
                hidden_pre,
                hidden_out,
                probs,
            },
        ))
    }

    /// Gradients: `(d_input, [hidden.w, hidden.b, output.w, output.b])`.
    pub fn backward(&self, cache: &HeadCache<T>, d_probs: &Tensor<T>) -> Result<(Tensor<T>, Vec<Tensor<T>>), ModelError> {
        let batch = cache.input.dim(0);
        let d_out_pre = sigmoid_backward(&cache.probs, d_probs).reshaped(&[batch, 1]);
        let out_grads = self.output.backward(&cache.hidden_out, &d_out_pre)?;
        let d_hidden_pre = relu_backward(&cache.hidden_pre, &out_grads.input);
        let hidden_grads = self.hidden.backward(&cache.input, &d_hidden_pre)?;
        Ok((
            hidden_grads.input,
            vec![hidden_grads.weights, hidden_grads.bias, out_grads.weights, out_grads.bias],
        ))
    }

    pub fn param_names(prefix: &str, out: &mut Vec<String>) {
        out.push(format!("{prefix}.hidden.weight"));
        out.push(format!("{prefix}.hidden.bias"));
        out.push(format!("{prefix}.output.weight"));
        out.push(format!("{prefix}.output.bias"));
    }

    pub fn params(&self) -> Vec<&Tensor<T>> {
        vec![&self.hidden.weights, &self.hidden.bias, &self.output.weights, &self.output.bias]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        vec![
            &mut self.hidden.weights,
            &mut self.hidden.bias,
            &mut self.output.weights,
            &mut self.output.bias,
        ]
    }
}
