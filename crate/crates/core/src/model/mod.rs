//! The dual-stream network: convolutional and recurrent streams emitting
//! equal-width feature vectors, fused by a sigmoid-mask attention module,
//! plus the single-stream and no-attention ablation variants.

pub mod attention;
pub mod conv_stream;
pub mod recurrent_stream;

pub use attention::{AttentionFusion, ClassifierHead};
pub use conv_stream::{flattened_width, pooled_lengths, ConvStream};
pub use recurrent_stream::RecurrentStream;

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::nn::checkpoint::{load_checkpoint, save_checkpoint, CheckpointError};
use crate::nn::NnError;
use crate::preprocess::scale_samples_for_conv;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    /// Variant/input mismatch or an unknown variant name.
    Config(String),
    Nn(NnError),
    Checkpoint(String),
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::Config(msg) => write!(f, "model configuration error: {msg}"),
            ModelError::Nn(e) => write!(f, "{e}"),
            ModelError::Checkpoint(msg) => write!(f, "checkpoint error: {msg}"),
        }
    }
}

impl std::error::Error for ModelError {}

impl From<NnError> for ModelError {
    fn from(e: NnError) -> Self {
        ModelError::Nn(e)
    }
}

impl From<CheckpointError> for ModelError {
    fn from(e: CheckpointError) -> Self {
        ModelError::Checkpoint(e.to_string())
    }
}

/// The five trainable configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VariantKind {
    ConvOnly,
    RnnRaw,
    RnnMfcc,
    DualNoAttention,
    Full,
}

impl VariantKind {
    pub const ALL: [VariantKind; 5] = [
        VariantKind::ConvOnly,
        VariantKind::RnnRaw,
        VariantKind::RnnMfcc,
        VariantKind::DualNoAttention,
        VariantKind::Full,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VariantKind::ConvOnly => "conv-only",
            VariantKind::RnnRaw => "rnn-raw",
            VariantKind::RnnMfcc => "rnn-mfcc",
            VariantKind::DualNoAttention => "dual-no-attention",
            VariantKind::Full => "full",
        }
    }

    pub fn parse(s: &str) -> Result<Self, ModelError> {
        match s {
            "conv-only" => Ok(VariantKind::ConvOnly),
            "rnn-raw" => Ok(VariantKind::RnnRaw),
            "rnn-mfcc" => Ok(VariantKind::RnnMfcc),
            "dual-no-attention" => Ok(VariantKind::DualNoAttention),
            "full" => Ok(VariantKind::Full),
            other => Err(ModelError::Config(format!(
                "unknown variant {other:?}; expected one of conv-only, rnn-raw, rnn-mfcc, dual-no-attention, full"
            ))),
        }
    }

    /// Row label used in ablation reports.
    pub fn method_name(self) -> &'static str {
        match self {
            VariantKind::ConvOnly => "Convolution Stream",
            VariantKind::RnnRaw => "Recurrent Stream with Raw Data",
            VariantKind::RnnMfcc => "Recurrent Stream with MFCC Feature",
            VariantKind::DualNoAttention => "Dual Stream Network without Attention",
            VariantKind::Full => "Proposed Method",
        }
    }

    pub fn uses_conv(self) -> bool {
        matches!(self, VariantKind::ConvOnly | VariantKind::DualNoAttention | VariantKind::Full)
    }

    pub fn uses_rnn(self) -> bool {
        !matches!(self, VariantKind::ConvOnly)
    }

    pub fn needs_mfcc(self) -> bool {
        matches!(self, VariantKind::RnnMfcc | VariantKind::DualNoAttention | VariantKind::Full)
    }
}

impl fmt::Display for VariantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvBlockDims {
    pub kernel: usize,
    pub filters: usize,
    pub pool_after: bool,
}

/// Every width in the network. `paper()` holds the published sizes; tests
/// shrink them to keep finite-difference sweeps fast.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelDims {
    pub input_len: usize,
    pub conv_blocks: Vec<ConvBlockDims>,
    pub stream_features: usize,
    pub gru_hidden: usize,
    pub mfcc_frames: usize,
    pub mfcc_coeffs: usize,
    pub attention_bottleneck: usize,
    pub head_hidden: usize,
    pub leaky_slope: f64,
    pub bn_momentum: f64,
    pub bn_epsilon: f64,
}

impl ModelDims {
    pub fn paper() -> Self {
        ModelDims {
            input_len: 2500,
            conv_blocks: vec![
                ConvBlockDims { kernel: 32, filters: 16, pool_after: true },
                ConvBlockDims { kernel: 16, filters: 32, pool_after: true },
                ConvBlockDims { kernel: 8, filters: 64, pool_after: false },
                ConvBlockDims { kernel: 8, filters: 64, pool_after: true },
                ConvBlockDims { kernel: 8, filters: 128, pool_after: false },
                ConvBlockDims { kernel: 4, filters: 256, pool_after: true },
            ],
            stream_features: 64,
            gru_hidden: 128,
            mfcc_frames: 18,
            mfcc_coeffs: 13,
            attention_bottleneck: 64,
            head_hidden: 32,
            leaky_slope: 0.01,
            bn_momentum: 0.1,
            bn_epsilon: 1e-5,
        }
    }

    /// Width of the feature vector entering the classifier head.
    pub fn head_input(&self, variant: VariantKind) -> usize {
        if variant.uses_conv() && variant.uses_rnn() {
            2 * self.stream_features
        } else {
            self.stream_features
        }
    }

    fn rnn_input(&self, variant: VariantKind) -> usize {
        if variant == VariantKind::RnnRaw {
            1
        } else {
            self.mfcc_coeffs
        }
    }
}

/// All learnable parameters of the selected variant.
pub struct DualStreamModel<T> {
    pub variant: VariantKind,
    pub dims: ModelDims,
    pub conv: Option<ConvStream<T>>,
    pub rnn: Option<RecurrentStream<T>>,
    pub attention: Option<AttentionFusion<T>>,
    pub head: ClassifierHead<T>,
}

/// Everything a backward pass needs from the matching forward pass.
pub struct ModelCache<T> {
    conv: Option<conv_stream::ConvStreamCache<T>>,
    rnn: Option<recurrent_stream::RnnStreamCache<T>>,
    fusion: Option<attention::FusionCache<T>>,
    head: attention::HeadCache<T>,
}

/// Ordered, named gradient set covering every parameter tensor once, in
/// [`DualStreamModel::parameter_names`] order.
pub struct Gradients<T> {
    entries: Vec<(String, Tensor<T>)>,
}

impl<T: Scalar> Gradients<T> {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn iter(&self) -> impl Iterator<Item = &(String, Tensor<T>)> {
        self.entries.iter()
    }

    /// Gradient tensors in parameter order.
    pub fn tensors(&self) -> Vec<&Tensor<T>> {
        self.entries.iter().map(|(_, t)| t).collect()
    }
}

/// Deterministically builds a variant at the published sizes.
pub fn build_variant<T: Scalar>(kind: VariantKind, seed: u64) -> DualStreamModel<T> {
    DualStreamModel::build(kind, ModelDims::paper(), seed)
}

impl<T: Scalar> DualStreamModel<T> {
    pub fn build(variant: VariantKind, dims: ModelDims, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let conv = variant.uses_conv().then(|| {
            ConvStream::new(
                &dims.conv_blocks,
                dims.input_len,
                dims.stream_features,
                dims.leaky_slope,
                dims.bn_momentum,
                dims.bn_epsilon,
                &mut rng,
            )
        });
        let rnn = variant.uses_rnn().then(|| {
            RecurrentStream::new(dims.gru_hidden, dims.rnn_input(variant), dims.stream_features, &mut rng)
        });
        let attention = (variant == VariantKind::Full)
            .then(|| AttentionFusion::new(2 * dims.stream_features, dims.attention_bottleneck, &mut rng));
        let head = ClassifierHead::new(dims.head_input(variant), dims.head_hidden, &mut rng);
        DualStreamModel {
            variant,
            dims,
            conv,
            rnn,
            attention,
            head,
        }
    }

    /// Conv-stream input: per-cycle peak normalization plus the unit
    /// offset, applied to the raw `(batch, 1, len)` cycles.
    fn conv_input(&self, cycles: &Tensor<T>) -> Tensor<T> {
        let mut scaled = Tensor::zeros(cycles.shape());
        for b in 0..cycles.dim(0) {
            let row = scale_samples_for_conv(cycles.row3(b, 0));
            scaled.row3_mut(b, 0).copy_from_slice(&row);
        }
        scaled
    }

    /// Raw cycles `(batch, 1, len)` transposed into a `(batch, len, 1)`
    /// sample-per-step sequence.
    fn raw_sequence(&self, cycles: &Tensor<T>) -> Tensor<T> {
        let (batch, len) = (cycles.dim(0), cycles.dim(2));
        let mut seq = Tensor::zeros(&[batch, len, 1]);
        for b in 0..batch {
            for (t, &v) in cycles.row3(b, 0).iter().enumerate() {
                seq.values_mut()[(b * len + t)] = v;
            }
        }
        seq
    }

    fn check_inputs(&self, cycles: &Tensor<T>, mfccs: Option<&Tensor<T>>) -> Result<usize, ModelError> {
        let needs_cycles = self.variant.uses_conv() || self.variant == VariantKind::RnnRaw;
        if needs_cycles && (cycles.rank() != 3 || cycles.dim(1) != 1 || cycles.dim(2) != self.dims.input_len) {
            return Err(ModelError::Config(format!(
                "variant {} expects cycles of shape (batch, 1, {}), got {:?}",
                self.variant,
                self.dims.input_len,
                cycles.shape()
            )));
        }
        let batch = cycles.dim(0);
        if self.variant.needs_mfcc() {
            let m = mfccs.ok_or_else(|| {
                ModelError::Config(format!("variant {} requires MFCC inputs", self.variant))
            })?;
            if m.rank() != 3
                || m.dim(0) != batch
                || m.dim(1) != self.dims.mfcc_frames
                || m.dim(2) != self.dims.mfcc_coeffs
            {
                return Err(ModelError::Config(format!(
                    "variant {} expects MFCCs of shape ({batch}, {}, {}), got {:?}",
                    self.variant,
                    self.dims.mfcc_frames,
                    self.dims.mfcc_coeffs,
                    m.shape()
                )));
            }
        }
        Ok(batch)
    }

    /// Train-mode forward pass (batch statistics, caches recorded).
    /// `cycles` are raw; the conv-stream scaling happens internally.
    pub fn forward_train(
        &mut self,
        cycles: &Tensor<T>,
        mfccs: Option<&Tensor<T>>,
    ) -> Result<(Tensor<T>, ModelCache<T>), ModelError> {
        self.check_inputs(cycles, mfccs)?;

        let mut conv_cache = None;
        let mut f_conv = None;
        if self.variant.uses_conv() {
            let input = self.conv_input(cycles);
            let (f, cache) = self.conv.as_mut().expect("conv stream present").forward_train(&input)?;
            f_conv = Some(f);
            conv_cache = Some(cache);
        }

        let mut rnn_cache = None;
        let mut f_rnn = None;
        if self.variant.uses_rnn() {
            let seq = if self.variant == VariantKind::RnnRaw {
                self.raw_sequence(cycles)
            } else {
                mfccs.expect("checked above").clone()
            };
            let (f, cache) = self.rnn.as_ref().expect("rnn stream present").forward(&seq)?;
            f_rnn = Some(f);
            rnn_cache = Some(cache);
        }

        let (head_in, fusion_cache) = match (&f_conv, &f_rnn) {
            (Some(c), Some(r)) => {
                let concat = concat_features(c, r);
                if self.variant == VariantKind::Full {
                    let (gated, cache) =
                        self.attention.as_ref().expect("attention present").forward(&concat)?;
                    (gated, Some(cache))
                } else {
                    (concat, None)
                }
            }
            (Some(c), None) => (c.clone(), None),
            (None, Some(r)) => (r.clone(), None),
            (None, None) => unreachable!("every variant uses at least one stream"),
        };

        let (probs, head_cache) = self.head.forward(&head_in)?;
        Ok((
            probs,
            ModelCache {
                conv: conv_cache,
                rnn: rnn_cache,
                fusion: fusion_cache,
                head: head_cache,
            },
        ))
    }

    /// Eval-mode forward pass: running statistics, no caches, `&self`.
    pub fn forward_eval(&self, cycles: &Tensor<T>, mfccs: Option<&Tensor<T>>) -> Result<Tensor<T>, ModelError> {
        self.check_inputs(cycles, mfccs)?;

        let f_conv = if self.variant.uses_conv() {
            let input = self.conv_input(cycles);
            Some(self.conv.as_ref().expect("conv stream present").forward_eval(&input)?)
        } else {
            None
        };
        let f_rnn = if self.variant.uses_rnn() {
            let seq = if self.variant == VariantKind::RnnRaw {
                self.raw_sequence(cycles)
            } else {
                mfccs.expect("checked above").clone()
            };
            Some(self.rnn.as_ref().expect("rnn stream present").forward_eval(&seq)?)
        } else {
            None
        };

        let head_in = match (&f_conv, &f_rnn) {
            (Some(c), Some(r)) => {
                let concat = concat_features(c, r);
                if self.variant == VariantKind::Full {
                    self.attention.as_ref().expect("attention present").forward(&concat)?.0
                } else {
                    concat
                }
            }
            (Some(c), None) => c.clone(),
            (None, Some(r)) => r.clone(),
            (None, None) => unreachable!(),
        };
        Ok(self.head.forward(&head_in)?.0)
    }

    /// Exact gradients for the forward pass that produced `cache`;
    /// parameter values are untouched.
    pub fn backward(&self, cache: &ModelCache<T>, d_probs: &Tensor<T>) -> Result<Gradients<T>, ModelError> {
        let (d_head_in, head_grads) = self.head.backward(&cache.head, d_probs)?;

        let (d_conv_feat, d_rnn_feat, fusion_grads) = if self.variant.uses_conv() && self.variant.uses_rnn() {
            let (d_concat, fusion_grads) = match (&cache.fusion, self.attention.as_ref()) {
                (Some(fc), Some(att)) => {
                    let (d_c, g) = att.backward(fc, &d_head_in)?;
                    (d_c, Some(g))
                }
                _ => (d_head_in, None),
            };
            let (dc, dr) = split_features(&d_concat, self.dims.stream_features);
            (Some(dc), Some(dr), fusion_grads)
        } else if self.variant.uses_conv() {
            (Some(d_head_in), None, None)
        } else {
            (None, Some(d_head_in), None)
        };

        let mut entries = Vec::new();
        if let (Some(conv), Some(conv_cache), Some(d_feat)) = (&self.conv, &cache.conv, &d_conv_feat) {
            let grads = conv.backward(conv_cache, d_feat)?;
            let mut names = Vec::new();
            ConvStream::<T>::param_names("conv_stream", conv.blocks.len(), &mut names);
            entries.extend(names.into_iter().zip(grads));
        }
        if let (Some(rnn), Some(rnn_cache), Some(d_feat)) = (&self.rnn, &cache.rnn, &d_rnn_feat) {
            let grads = rnn.backward(rnn_cache, d_feat)?;
            let mut names = Vec::new();
            RecurrentStream::<T>::param_names("rnn_stream", &mut names);
            entries.extend(names.into_iter().zip(grads));
        }
        if let Some(grads) = fusion_grads {
            let mut names = Vec::new();
            AttentionFusion::<T>::param_names("attention", &mut names);
            entries.extend(names.into_iter().zip(grads));
        }
        {
            let mut names = Vec::new();
            ClassifierHead::<T>::param_names("head", &mut names);
            entries.extend(names.into_iter().zip(head_grads));
        }
        Ok(Gradients { entries })
    }

    /// Canonical parameter order shared by [`Self::named_parameters`],
    /// [`Self::parameters_mut`], and [`Self::backward`].
    pub fn parameter_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        if let Some(conv) = &self.conv {
            ConvStream::<T>::param_names("conv_stream", conv.blocks.len(), &mut names);
        }
        if self.rnn.is_some() {
            RecurrentStream::<T>::param_names("rnn_stream", &mut names);
        }
        if self.attention.is_some() {
            AttentionFusion::<T>::param_names("attention", &mut names);
        }
        ClassifierHead::<T>::param_names("head", &mut names);
        names
    }

    pub fn named_parameters(&self) -> Vec<(String, &Tensor<T>)> {
        self.parameter_names().into_iter().zip(self.parameters()).collect()
    }

    pub fn parameters(&self) -> Vec<&Tensor<T>> {
        let mut out = Vec::new();
        if let Some(conv) = &self.conv {
            out.extend(conv.params());
        }
        if let Some(rnn) = &self.rnn {
            out.extend(rnn.params());
        }
        if let Some(att) = &self.attention {
            out.extend(att.params());
        }
        out.extend(self.head.params());
        out
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = Vec::new();
        if let Some(conv) = &mut self.conv {
            out.extend(conv.params_mut());
        }
        if let Some(rnn) = &mut self.rnn {
            out.extend(rnn.params_mut());
        }
        if let Some(att) = &mut self.attention {
            out.extend(att.params_mut());
        }
        out.extend(self.head.params_mut());
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|t| t.len()).sum()
    }

    /// Non-learnable state (batch-norm running statistics).
    pub fn named_buffers(&self) -> Vec<(String, &Tensor<T>)> {
        let mut names = Vec::new();
        let mut tensors = Vec::new();
        if let Some(conv) = &self.conv {
            ConvStream::<T>::buffer_names("conv_stream", conv.blocks.len(), &mut names);
            tensors.extend(conv.buffers());
        }
        names.into_iter().zip(tensors).collect()
    }

    fn buffers_mut(&mut self) -> Vec<&mut Tensor<T>> {
        match &mut self.conv {
            Some(conv) => conv.buffers_mut(),
            None => Vec::new(),
        }
    }

    /// Serializes parameters and buffers into the tensor container.
    pub fn to_checkpoint_bytes(&self) -> Vec<u8> {
        let named: Vec<(String, &Tensor<T>)> = self
            .named_parameters()
            .into_iter()
            .chain(self.named_buffers())
            .collect();
        let borrowed: Vec<(&str, &Tensor<T>)> = named.iter().map(|(n, t)| (n.as_str(), *t)).collect();
        save_checkpoint(&borrowed)
    }

    /// Restores parameters and buffers, refusing name or shape drift.
    pub fn load_checkpoint_bytes(&mut self, bytes: &[u8]) -> Result<(), ModelError> {
        let entries = load_checkpoint(bytes)?;
        let mut names = self.parameter_names();
        let buffer_names: Vec<String> = self.named_buffers().into_iter().map(|(n, _)| n).collect();
        names.extend(buffer_names);

        if entries.len() != names.len() {
            return Err(ModelError::Checkpoint(format!(
                "checkpoint holds {} tensors but variant {} has {}",
                entries.len(),
                self.variant,
                names.len()
            )));
        }
        let mut slots = self.parameters_mut();
        slots.extend(self.buffers_mut());
        for (((name, loaded), expect_name), slot) in entries.into_iter().zip(&names).zip(slots) {
            if &name != expect_name {
                return Err(ModelError::Checkpoint(format!(
                    "tensor {name:?} where {expect_name:?} was expected"
                )));
            }
            if loaded.shape() != slot.shape() {
                return Err(ModelError::Checkpoint(format!(
                    "tensor {name:?} has shape {:?}, expected {:?}",
                    loaded.shape(),
                    slot.shape()
                )));
            }
            let cast: Tensor<T> = loaded.cast();
            *slot = cast;
        }
        Ok(())
    }
}

fn concat_features<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
    let batch = a.dim(0);
    let (wa, wb) = (a.dim(1), b.dim(1));
    let mut out = Tensor::zeros(&[batch, wa + wb]);
    for i in 0..batch {
        out.row2_mut(i)[..wa].copy_from_slice(a.row2(i));
        out.row2_mut(i)[wa..].copy_from_slice(b.row2(i));
    }
    out
}

fn split_features<T: Scalar>(concat: &Tensor<T>, width: usize) -> (Tensor<T>, Tensor<T>) {
    let batch = concat.dim(0);
    let rest = concat.dim(1) - width;
    let mut a = Tensor::zeros(&[batch, width]);
    let mut b = Tensor::zeros(&[batch, rest]);
    for i in 0..batch {
        a.row2_mut(i).copy_from_slice(&concat.row2(i)[..width]);
        b.row2_mut(i).copy_from_slice(&concat.row2(i)[width..]);
    }
    (a, b)
}

#[cfg(test)]
mod tests;
