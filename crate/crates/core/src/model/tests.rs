use super::*;

use crate::nn::bce_loss;
use crate::nn::gradcheck::{central_diff_grad, max_rel_error};

fn reduced_dims() -> ModelDims {
    // Published layout with filters divided by 8, GRU hidden 8, inputs of
    // length 100; MFCC geometry shrunk to match.
    ModelDims {
        input_len: 100,
        conv_blocks: vec![
            ConvBlockDims { kernel: 32, filters: 2, pool_after: true },
            ConvBlockDims { kernel: 16, filters: 4, pool_after: true },
            ConvBlockDims { kernel: 8, filters: 8, pool_after: false },
            ConvBlockDims { kernel: 8, filters: 8, pool_after: true },
            ConvBlockDims { kernel: 8, filters: 16, pool_after: false },
            ConvBlockDims { kernel: 4, filters: 32, pool_after: true },
        ],
        stream_features: 16,
        gru_hidden: 8,
        mfcc_frames: 4,
        mfcc_coeffs: 5,
        attention_bottleneck: 8,
        head_hidden: 8,
        ..ModelDims::paper()
    }
}

fn pseudo(values: usize, scale: f64, offset: u64) -> Vec<f64> {
    (0..values)
        .map(|i| {
            let x = (i as u64).wrapping_mul(6364136223846793005).wrapping_add(offset);
            ((x >> 33) as f64 / (1u64 << 31) as f64 - 1.0) * scale
        })
        .collect()
}

fn reduced_inputs(batch: usize, dims: &ModelDims) -> (Tensor<f64>, Tensor<f64>) {
    let cycles = Tensor::from_values(
        &[batch, 1, dims.input_len],
        pseudo(batch * dims.input_len, 0.8, 12345),
    );
    let mfccs = Tensor::from_values(
        &[batch, dims.mfcc_frames, dims.mfcc_coeffs],
        pseudo(batch * dims.mfcc_frames * dims.mfcc_coeffs, 1.1, 999),
    );
    (cycles, mfccs)
}

/// Closed-form parameter count from the dims alone, independent of the
/// layer structs.
fn analytic_parameter_count(dims: &ModelDims, variant: VariantKind) -> usize {
    let mut total = 0;
    if variant.uses_conv() {
        let mut channels = 1;
        for b in &dims.conv_blocks {
            total += b.filters * channels * b.kernel + b.filters; // conv
            total += 2 * b.filters; // bn gamma + beta
            channels = b.filters;
        }
        total += dims.stream_features * flattened_width(&dims.conv_blocks, dims.input_len)
            + dims.stream_features;
    }
    if variant.uses_rnn() {
        let input = if variant == VariantKind::RnnRaw { 1 } else { dims.mfcc_coeffs };
        total += 3 * (dims.gru_hidden * input) + 3 * (dims.gru_hidden * dims.gru_hidden) + 3 * dims.gru_hidden;
        total += dims.stream_features * dims.gru_hidden + dims.stream_features;
    }
    if variant == VariantKind::Full {
        let concat = 2 * dims.stream_features;
        total += dims.attention_bottleneck * concat + dims.attention_bottleneck;
        total += concat * dims.attention_bottleneck + concat;
    }
    let head_in = dims.head_input(variant);
    total += dims.head_hidden * head_in + dims.head_hidden;
    total += head_in.min(1) * 0 + dims.head_hidden + 1; // output layer: 1 x hidden + 1
    total
}

#[test]
fn pooled_lengths_follow_the_ladder() {
    let dims = ModelDims::paper();
    assert_eq!(pooled_lengths(&dims.conv_blocks, dims.input_len), vec![1250, 625, 312, 156]);
    assert_eq!(flattened_width(&dims.conv_blocks, dims.input_len), 156 * 256);
}

#[test]
fn conv_stream_emits_the_shared_width() {
    let mut model = build_variant::<f64>(VariantKind::ConvOnly, 5);
    let cycles = Tensor::from_values(&[2, 1, 2500], pseudo(2 * 2500, 0.9, 7));
    let (probs, _) = model.forward_train(&cycles, None).unwrap();
    assert_eq!(probs.shape(), &[2]);
    let conv = model.conv.as_ref().unwrap();
    let scaled = model.conv_input(&cycles);
    let features = conv.forward_eval(&scaled).unwrap();
    assert_eq!(features.shape(), &[2, 64]);
    assert!(features.all_finite());
}

#[test]
fn recurrent_stream_shape_and_zero_propagation() {
    use crate::nn::GruLayer;
    let model = build_variant::<f64>(VariantKind::RnnMfcc, 9);
    let rnn = model.rnn.as_ref().unwrap();
    let mfcc = Tensor::from_values(&[3, 18, 13], pseudo(3 * 18 * 13, 1.0, 60));
    let (features, _) = rnn.forward(&mfcc).unwrap();
    assert_eq!(features.shape(), &[3, 64]);

    // Zero GRU parameters and zero input leave only the projection bias.
    let mut zeroed = RecurrentStream {
        gru: GruLayer::zeros(128, 13),
        fc: rnn.fc.clone(),
    };
    zeroed.fc.bias = Tensor::from_fn(&[64], |i| i as f64 * 0.01);
    let silent = Tensor::zeros(&[2, 18, 13]);
    let (out, _) = zeroed.forward(&silent).unwrap();
    for b in 0..2 {
        for (o, expected) in out.row2(b).iter().zip(zeroed.fc.bias.values()) {
            assert!((o - expected).abs() < 1e-12);
        }
    }
}

#[test]
fn time_order_matters_to_the_recurrent_stream() {
    let model = build_variant::<f64>(VariantKind::RnnMfcc, 11);
    let rnn = model.rnn.as_ref().unwrap();
    let mfcc = Tensor::from_values(&[1, 18, 13], pseudo(18 * 13, 1.0, 3));
    let mut reversed = Tensor::zeros(&[1, 18, 13]);
    for t in 0..18 {
        reversed.row3_mut(0, 17 - t).copy_from_slice(mfcc.row3(0, t));
    }
    let (a, _) = rnn.forward(&mfcc).unwrap();
    let (b, _) = rnn.forward(&reversed).unwrap();
    let max_diff = a
        .iter()
        .zip(b.iter())
        .map(|(&x, &y)| (x - y).abs())
        .fold(0.0, f64::max);
    assert!(max_diff > 1e-6, "sequence order had no effect ({max_diff})");
}

/// Copies every parameter whose name both models share.
fn copy_shared_parameters<T: crate::Scalar>(from: &DualStreamModel<T>, to: &mut DualStreamModel<T>) {
    let src: std::collections::BTreeMap<String, Tensor<T>> = from
        .named_parameters()
        .into_iter()
        .map(|(n, t)| (n, t.clone()))
        .collect();
    let names = to.parameter_names();
    for (name, slot) in names.iter().zip(to.parameters_mut()) {
        if let Some(tensor) = src.get(name) {
            *slot = tensor.clone();
        }
    }
}

#[test]
fn saturated_mask_reduces_full_to_no_attention() {
    let dims = reduced_dims();
    let mut full = DualStreamModel::<f64>::build(VariantKind::Full, dims.clone(), 31);
    let mut plain = DualStreamModel::<f64>::build(VariantKind::DualNoAttention, dims.clone(), 32);
    copy_shared_parameters(&full, &mut plain);

    // Drive the expand layer to emit a mask of ones.
    let att = full.attention.as_mut().unwrap();
    att.expand.weights = Tensor::zeros(att.expand.weights.shape());
    att.expand.bias = Tensor::filled(att.expand.bias.shape(), 40.0);

    let (cycles, mfccs) = reduced_inputs(3, &dims);
    let a = full.forward_eval(&cycles, Some(&mfccs)).unwrap();
    let b = plain.forward_eval(&cycles, Some(&mfccs)).unwrap();
    for (x, y) in a.iter().zip(b.iter()) {
        assert!((x - y).abs() < 1e-6, "{x} vs {y}");
    }
}

#[test]
fn annihilated_mask_ignores_the_input() {
    let dims = reduced_dims();
    let mut full = DualStreamModel::<f64>::build(VariantKind::Full, dims.clone(), 33);
    let att = full.attention.as_mut().unwrap();
    att.expand.weights = Tensor::zeros(att.expand.weights.shape());
    att.expand.bias = Tensor::filled(att.expand.bias.shape(), -40.0);

    let (cycles_a, mfccs_a) = reduced_inputs(2, &dims);
    let cycles_b = Tensor::from_values(&[2, 1, dims.input_len], pseudo(2 * dims.input_len, 0.5, 777));
    let mfccs_b = Tensor::from_values(
        &[2, dims.mfcc_frames, dims.mfcc_coeffs],
        pseudo(2 * dims.mfcc_frames * dims.mfcc_coeffs, 0.7, 778),
    );
    let a = full.forward_eval(&cycles_a, Some(&mfccs_a)).unwrap();
    let b = full.forward_eval(&cycles_b, Some(&mfccs_b)).unwrap();
    for (x, y) in a.iter().zip(b.iter()) {
        assert!((x - y).abs() < 1e-9, "masked-out model still depends on inputs");
    }
}

#[test]
fn mask_stays_strictly_inside_the_unit_interval() {
    let dims = reduced_dims();
    let full = DualStreamModel::<f64>::build(VariantKind::Full, dims.clone(), 35);
    let (cycles, mfccs) = reduced_inputs(4, &dims);
    // Reach the mask through the fusion cache of a train-mode pass.
    let mut probe = DualStreamModel::<f64>::build(VariantKind::Full, dims, 35);
    copy_shared_parameters(&full, &mut probe);
    let (_, cache) = probe.forward_train(&cycles, Some(&mfccs)).unwrap();
    let mask = &cache.fusion.as_ref().unwrap().mask;
    assert!(mask.iter().all(|&m| m > 0.0 && m < 1.0));
}

#[test]
fn outputs_are_probabilities_for_every_variant() {
    let dims = reduced_dims();
    let (cycles, mfccs) = reduced_inputs(3, &dims);
    for kind in VariantKind::ALL {
        let mut model = DualStreamModel::<f64>::build(kind, dims.clone(), 40);
        let (probs, _) = model.forward_train(&cycles, Some(&mfccs)).unwrap();
        assert_eq!(probs.shape(), &[3], "{kind}");
        assert!(probs.iter().all(|&p| p > 0.0 && p < 1.0), "{kind}");
    }
}

#[test]
fn eval_forward_is_deterministic() {
    let dims = reduced_dims();
    let model = DualStreamModel::<f64>::build(VariantKind::Full, dims.clone(), 41);
    let (cycles, mfccs) = reduced_inputs(2, &dims);
    let a = model.forward_eval(&cycles, Some(&mfccs)).unwrap();
    let b = model.forward_eval(&cycles, Some(&mfccs)).unwrap();
    assert_eq!(a.values(), b.values());
}

#[test]
fn missing_mfccs_are_a_config_error() {
    let dims = reduced_dims();
    let mut model = DualStreamModel::<f64>::build(VariantKind::Full, dims.clone(), 42);
    let (cycles, _) = reduced_inputs(2, &dims);
    assert!(matches!(model.forward_train(&cycles, None), Err(ModelError::Config(_))));
}

#[test]
fn rnn_raw_accepts_full_length_cycles() {
    let model = build_variant::<f32>(VariantKind::RnnRaw, 44);
    let cycles = Tensor::from_values(
        &[1, 1, 2500],
        pseudo(2500, 0.5, 5).into_iter().map(|v| v as f32).collect(),
    );
    let probs = model.forward_eval(&cycles, None).unwrap();
    assert_eq!(probs.shape(), &[1]);
    assert!(probs.values()[0] > 0.0 && probs.values()[0] < 1.0);
}

#[test]
fn zero_upstream_zeroes_every_gradient() {
    let dims = reduced_dims();
    let mut model = DualStreamModel::<f64>::build(VariantKind::Full, dims.clone(), 50);
    let (cycles, mfccs) = reduced_inputs(2, &dims);
    let (_, cache) = model.forward_train(&cycles, Some(&mfccs)).unwrap();
    let grads = model.backward(&cache, &Tensor::zeros(&[2])).unwrap();
    for (name, g) in grads.iter() {
        assert!(g.iter().all(|&v| v == 0.0), "nonzero gradient in {name}");
    }
}

#[test]
fn gradient_set_covers_every_parameter_exactly_once() {
    let dims = reduced_dims();
    for kind in VariantKind::ALL {
        let mut model = DualStreamModel::<f64>::build(kind, dims.clone(), 51);
        let (cycles, mfccs) = reduced_inputs(2, &dims);
        let (probs, cache) = model.forward_train(&cycles, Some(&mfccs)).unwrap();
        let grads = model.backward(&cache, &probs.map(|_| 1.0)).unwrap();
        let names = model.parameter_names();
        assert_eq!(grads.len(), names.len(), "{kind}");
        for ((gname, g), (pname, p)) in grads.iter().zip(model.named_parameters()) {
            assert_eq!(gname, &pname, "{kind}");
            assert_eq!(g.shape(), p.shape(), "{kind}: {gname}");
        }
    }
}

#[test]
fn identical_seeds_give_bit_identical_checkpoints() {
    for kind in VariantKind::ALL {
        let a = build_variant::<f32>(kind, 77);
        let b = build_variant::<f32>(kind, 77);
        assert_eq!(a.to_checkpoint_bytes(), b.to_checkpoint_bytes(), "{kind}");
        let c = build_variant::<f32>(kind, 78);
        assert_ne!(a.to_checkpoint_bytes(), c.to_checkpoint_bytes(), "{kind}");
    }
}

#[test]
fn checkpoints_round_trip_bit_exactly() {
    let mut source = build_variant::<f32>(VariantKind::Full, 80);
    // Perturb running stats so buffers are exercised too.
    for buf in source.conv.as_mut().unwrap().buffers_mut() {
        for v in buf.values_mut() {
            *v += 0.25;
        }
    }
    let bytes = source.to_checkpoint_bytes();
    let mut restored = build_variant::<f32>(VariantKind::Full, 81);
    restored.load_checkpoint_bytes(&bytes).unwrap();
    assert_eq!(restored.to_checkpoint_bytes(), bytes);
}

#[test]
fn checkpoints_refuse_the_wrong_variant() {
    let full = build_variant::<f32>(VariantKind::Full, 82);
    let mut conv_only = build_variant::<f32>(VariantKind::ConvOnly, 82);
    assert!(matches!(
        conv_only.load_checkpoint_bytes(&full.to_checkpoint_bytes()),
        Err(ModelError::Checkpoint(_))
    ));
}

#[test]
fn parameter_census_matches_the_closed_form() {
    let dims = ModelDims::paper();
    for kind in VariantKind::ALL {
        let model = DualStreamModel::<f32>::build(kind, dims.clone(), 90);
        assert_eq!(
            model.parameter_count(),
            analytic_parameter_count(&dims, kind),
            "{kind}"
        );
    }
    // Spot value for the published full model, computed by hand from the
    // block ladder: conv 2 812 112, gru 54 528, rnn fc 8 256,
    // attention 16 576, head 4 161.
    let full = DualStreamModel::<f32>::build(VariantKind::Full, dims, 91);
    assert_eq!(full.parameter_count(), 2_895_633);
}

#[test]
fn full_reduced_model_gradients_match_finite_differences() {
    let dims = reduced_dims();
    let mut model = DualStreamModel::<f64>::build(VariantKind::Full, dims.clone(), 61);
    let (cycles, mfccs) = reduced_inputs(2, &dims);
    let targets = Tensor::from_values(&[2], vec![1.0, 0.0]);

    let (probs, cache) = model.forward_train(&cycles, Some(&mfccs)).unwrap();
    let (_, d_probs) = bce_loss(&probs, &targets).unwrap();
    let analytic = model.backward(&cache, &d_probs).unwrap();
    let analytic_flat: Vec<f64> = analytic
        .tensors()
        .iter()
        .flat_map(|t| t.values().to_vec())
        .collect();

    let flat0: Vec<f64> = model.parameters().iter().flat_map(|t| t.values().to_vec()).collect();
    let mut numeric = Vec::with_capacity(flat0.len());
    let step = 1e-3;
    let mut cursor = 0usize;
    let n_tensors = model.parameters().len();
    for t_idx in 0..n_tensors {
        let len = model.parameters()[t_idx].len();
        for i in 0..len {
            let orig = flat0[cursor + i];
            let mut eval_at = |v: f64| -> f64 {
                model.parameters_mut()[t_idx].values_mut()[i] = v;
                let (p, _) = model.forward_train(&cycles, Some(&mfccs)).unwrap();
                bce_loss(&p, &targets).unwrap().0
            };
            let plus = eval_at(orig + step);
            let minus = eval_at(orig - step);
            model.parameters_mut()[t_idx].values_mut()[i] = orig;
            numeric.push((plus - minus) / (2.0 * step));
        }
        cursor += len;
    }

    let err = max_rel_error(&analytic_flat, &numeric);
    assert!(err < 1e-4, "full-model gradient relative error {err}");
}

#[test]
fn attention_fusion_gradients_match_finite_differences() {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(66);
    let fusion = AttentionFusion::<f64>::new(6, 3, &mut rng);
    let concat0 = pseudo(2 * 6, 1.0, 42);
    let up = pseudo(2 * 6, 0.8, 43);

    let loss = |f: &AttentionFusion<f64>, c: &[f64]| -> f64 {
        let (g, _) = f.forward(&Tensor::from_values(&[2, 6], c.to_vec())).unwrap();
        g.iter().zip(&up).map(|(&y, u)| y * u).sum()
    };

    let (_, cache) = fusion.forward(&Tensor::from_values(&[2, 6], concat0.clone())).unwrap();
    let (d_concat, grads) = fusion
        .backward(&cache, &Tensor::from_values(&[2, 6], up.clone()))
        .unwrap();

    let numeric_c = central_diff_grad(|c| loss(&fusion, c), &concat0, 1e-4);
    assert!(max_rel_error(d_concat.values(), &numeric_c) < 1e-4);

    // Squeeze weights via finite differences.
    let w0 = fusion.squeeze.weights.values().to_vec();
    let numeric_w = central_diff_grad(
        |w| {
            let mut probe = AttentionFusion {
                squeeze: fusion.squeeze.clone(),
                expand: fusion.expand.clone(),
            };
            probe.squeeze.weights = Tensor::from_values(&[3, 6], w.to_vec());
            loss(&probe, &concat0)
        },
        &w0,
        1e-4,
    );
    assert!(max_rel_error(grads[0].values(), &numeric_w) < 1e-4);
}
