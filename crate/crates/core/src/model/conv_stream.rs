//! Convolutional stream: a ladder of conv + batchnorm + leaky-ReLU blocks
//! with interleaved max pools, flattened into a fixed-width dense layer.

use rand::Rng;

use crate::model::{ConvBlockDims, ModelError};
use crate::nn::{
    leaky_relu, leaky_relu_backward, maxpool1d, maxpool1d_backward, BatchNorm1dLayer, BnCache,
    Conv1dLayer, DenseLayer,
};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const POOL: usize = 2;

pub struct ConvBlock<T> {
    pub conv: Conv1dLayer<T>,
    pub bn: BatchNorm1dLayer<T>,
    pub pool_after: bool,
}

pub struct ConvStream<T> {
    pub blocks: Vec<ConvBlock<T>>,
    pub fc: DenseLayer<T>,
    pub leaky_slope: T,
    pub input_len: usize,
}

struct BlockCache<T> {
    conv_in: Tensor<T>,
    conv_out: Tensor<T>,
    bn_cache: BnCache<T>,
    bn_out: Tensor<T>,
    pool_argmax: Option<Vec<usize>>,
    pool_in_shape: Vec<usize>,
}

pub struct ConvStreamCache<T> {
    blocks: Vec<BlockCache<T>>,
    flat_in: Tensor<T>,
}

impl<T: Scalar> ConvStream<T> {
    pub fn new(
        blocks: &[ConvBlockDims],
        input_len: usize,
        stream_features: usize,
        leaky_slope: f64,
        bn_momentum: f64,
        bn_epsilon: f64,
        rng: &mut impl Rng,
    ) -> Self {
        let mut built = Vec::with_capacity(blocks.len());
        let mut channels = 1usize;
        for b in blocks {
            built.push(ConvBlock {
                conv: Conv1dLayer::glorot(b.filters, channels, b.kernel, rng),
                bn: BatchNorm1dLayer::new(b.filters, T::from_f64(bn_momentum), T::from_f64(bn_epsilon)),
                pool_after: b.pool_after,
            });
            channels = b.filters;
        }
        let flat = flattened_width(blocks, input_len);
        ConvStream {
            blocks: built,
            fc: DenseLayer::glorot(stream_features, flat, rng),
            leaky_slope: T::from_f64(leaky_slope),
            input_len,
        }
    }

    pub fn forward_train(&mut self, input: &Tensor<T>) -> Result<(Tensor<T>, ConvStreamCache<T>), ModelError> {
        self.check_input(input)?;
        let mut caches = Vec::with_capacity(self.blocks.len());
        let mut current = input.clone();
        for block in &mut self.blocks {
            let conv_out = block.conv.forward(&current)?;
            let (bn_out, bn_cache) = block.bn.forward_train(&conv_out)?;
            let activated = leaky_relu(&bn_out, self.leaky_slope);
            let pool_in_shape = activated.shape().to_vec();
            let (next, pool_argmax) = if block.pool_after {
                let (pooled, argmax) = maxpool1d(&activated, POOL, POOL)?;
                (pooled, Some(argmax))
            } else {
                (activated, None)
            };
            caches.push(BlockCache {
                conv_in: current,
                conv_out,
                bn_cache,
                bn_out,
                pool_argmax,
                pool_in_shape,
            });
            current = next;
        }
        let flat_in = flatten(current);
        let out = self.fc.forward(&flat_in)?;
        Ok((out, ConvStreamCache { blocks: caches, flat_in }))
    }

    pub fn forward_eval(&self, input: &Tensor<T>) -> Result<Tensor<T>, ModelError> {
        self.check_input(input)?;
        let mut current = input.clone();
        for block in &self.blocks {
            let conv_out = block.conv.forward(&current)?;
            let bn_out = block.bn.forward_eval(&conv_out)?;
            let activated = leaky_relu(&bn_out, self.leaky_slope);
            current = if block.pool_after {
                maxpool1d(&activated, POOL, POOL)?.0
            } else {
                activated
            };
        }
        Ok(self.fc.forward(&flatten(current))?)
    }

    /// Parameter gradients in [`Self::param_names`] order.
    pub fn backward(&self, cache: &ConvStreamCache<T>, upstream: &Tensor<T>) -> Result<Vec<Tensor<T>>, ModelError> {
        if cache.blocks.len() != self.blocks.len() {
            return Err(ModelError::Nn(crate::nn::NnError::State(
                "conv stream cache does not match block count".into(),
            )));
        }
        let fc_grads = self.fc.backward(&cache.flat_in, upstream)?;
        let mut d_current = fc_grads.input.reshaped(&cache.blocks.last().map_or_else(
            || cache.flat_in.shape().to_vec(),
            |last| pooled_shape(last),
        ));

        // Gradients per block, collected walking backward then reversed.
        let mut rev: Vec<[Tensor<T>; 4]> = Vec::with_capacity(self.blocks.len());
        for (block, bc) in self.blocks.iter().zip(&cache.blocks).rev() {
            let d_activated = match &bc.pool_argmax {
                Some(argmax) => maxpool1d_backward(&bc.pool_in_shape, argmax, &d_current)?,
                None => d_current,
            };
            let d_bn_out = leaky_relu_backward(&bc.bn_out, &d_activated, self.leaky_slope);
            let bn_grads = block.bn.backward(&bc.conv_out, &bc.bn_cache, &d_bn_out)?;
            let conv_grads = block.conv.backward(&bc.conv_in, &bn_grads.input)?;
            d_current = conv_grads.input;
            rev.push([conv_grads.weights, conv_grads.bias, bn_grads.gamma, bn_grads.beta]);
        }

        let mut out = Vec::with_capacity(4 * self.blocks.len() + 2);
        for quad in rev.into_iter().rev() {
            out.extend(quad);
        }
        out.push(fc_grads.weights);
        out.push(fc_grads.bias);
        Ok(out)
    }

    fn check_input(&self, input: &Tensor<T>) -> Result<(), ModelError> {
        if input.rank() != 3 || input.dim(1) != 1 || input.dim(2) != self.input_len {
            return Err(ModelError::Config(format!(
                "conv stream expects (batch, 1, {}), got {:?}",
                self.input_len,
                input.shape()
            )));
        }
        Ok(())
    }

    pub fn param_names(prefix: &str, blocks: usize, out: &mut Vec<String>) {
        for i in 0..blocks {
            out.push(format!("{prefix}.block{i}.conv.weight"));
            out.push(format!("{prefix}.block{i}.conv.bias"));
            out.push(format!("{prefix}.block{i}.bn.gamma"));
            out.push(format!("{prefix}.block{i}.bn.beta"));
        }
        out.push(format!("{prefix}.fc.weight"));
        out.push(format!("{prefix}.fc.bias"));
    }

    pub fn params(&self) -> Vec<&Tensor<T>> {
        let mut out = Vec::with_capacity(4 * self.blocks.len() + 2);
        for b in &self.blocks {
            out.push(&b.conv.weights);
            out.push(&b.conv.bias);
            out.push(&b.bn.gamma);
            out.push(&b.bn.beta);
        }
        out.push(&self.fc.weights);
        out.push(&self.fc.bias);
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = Vec::with_capacity(4 * self.blocks.len() + 2);
        for b in &mut self.blocks {
            out.push(&mut b.conv.weights);
            out.push(&mut b.conv.bias);
            out.push(&mut b.bn.gamma);
            out.push(&mut b.bn.beta);
        }
        out.push(&mut self.fc.weights);
        out.push(&mut self.fc.bias);
        out
    }

    pub fn buffer_names(prefix: &str, blocks: usize, out: &mut Vec<String>) {
        for i in 0..blocks {
            out.push(format!("{prefix}.block{i}.bn.running_mean"));
            out.push(format!("{prefix}.block{i}.bn.running_var"));
        }
    }

    pub fn buffers(&self) -> Vec<&Tensor<T>> {
        self.blocks
            .iter()
            .flat_map(|b| [&b.bn.running_mean, &b.bn.running_var])
            .collect()
    }

    pub fn buffers_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.blocks
            .iter_mut()
            .flat_map(|b| [&mut b.bn.running_mean, &mut b.bn.running_var])
            .collect()
    }
}

fn pooled_shape<T: Scalar>(cache: &BlockCache<T>) -> Vec<usize> {
    match cache.pool_argmax {
        Some(_) => {
            let s = &cache.pool_in_shape;
            vec![s[0], s[1], (s[2] - POOL) / POOL + 1]
        }
        None => cache.pool_in_shape.clone(),
    }
}

fn flatten<T: Scalar>(t: Tensor<T>) -> Tensor<T> {
    let batch = t.dim(0);
    let per = t.len() / batch;
    t.reshaped(&[batch, per])
}

/// Sequence length left after the pools, times the final channel count.
pub fn flattened_width(blocks: &[ConvBlockDims], input_len: usize) -> usize {
    let mut len = input_len;
    for b in blocks {
        if b.pool_after {
            len = (len - POOL) / POOL + 1;
        }
    }
    len * blocks.last().map(|b| b.filters).unwrap_or(1)
}

/// Intermediate sequence lengths after each pool.
pub fn pooled_lengths(blocks: &[ConvBlockDims], input_len: usize) -> Vec<usize> {
    let mut lens = Vec::new();
    let mut len = input_len;
    for b in blocks {
        if b.pool_after {
            len = (len - POOL) / POOL + 1;
            lens.push(len);
        }
    }
    lens
}
