//! 1D max pooling with argmax routing for the backward pass.

use crate::nn::NnError;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Pools `(batch, channels, len)` down to `floor((len - pool)/stride) + 1`
/// positions per channel, dropping any trailing remainder. Ties take the
/// earlier index. Returns the pooled tensor and the flat input index of
/// each winner.
pub fn maxpool1d<T: Scalar>(
    input: &Tensor<T>,
    pool: usize,
    stride: usize,
) -> Result<(Tensor<T>, Vec<usize>), NnError> {
    assert!(pool >= 1 && stride >= 1);
    if input.rank() != 3 {
        return Err(NnError::Shape(format!("maxpool1d expects rank 3, got {:?}", input.shape())));
    }
    let (batch, channels, len) = (input.dim(0), input.dim(1), input.dim(2));
    if len < pool {
        return Err(NnError::Shape(format!("maxpool1d window {pool} exceeds input length {len}")));
    }
    let out_len = (len - pool) / stride + 1;
    let mut out = Tensor::zeros(&[batch, channels, out_len]);
    let mut argmax = vec![0usize; batch * channels * out_len];

    for b in 0..batch {
        for c in 0..channels {
            let row = input.row3(b, c);
            let base = input.offset3(b, c, 0);
            let out_row = out.row3_mut(b, c);
            for (o, out_v) in out_row.iter_mut().enumerate() {
                let start = o * stride;
                let mut best = row[start];
                let mut best_i = start;
                for (i, &v) in row[start..start + pool].iter().enumerate().skip(1) {
                    if v > best {
                        best = v;
                        best_i = start + i;
                    }
                }
                *out_v = best;
                argmax[(b * channels + c) * out_len + o] = base + best_i;
            }
        }
    }
    Ok((out, argmax))
}

/// Routes the upstream gradient back to each window's winning position.
pub fn maxpool1d_backward<T: Scalar>(
    input_shape: &[usize],
    argmax: &[usize],
    upstream: &Tensor<T>,
) -> Result<Tensor<T>, NnError> {
    if upstream.len() != argmax.len() {
        return Err(NnError::State(format!(
            "argmax cache holds {} entries but upstream has {} values",
            argmax.len(),
            upstream.len()
        )));
    }
    let mut d_input = Tensor::zeros(input_shape);
    for (&idx, &g) in argmax.iter().zip(upstream.iter()) {
        d_input.values_mut()[idx] += g;
    }
    Ok(d_input)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_example_with_trailing_remainder() {
        let x = Tensor::from_values(&[1, 1, 5], vec![1.0f64, 3.0, 2.0, 2.0, 5.0]);
        let (y, argmax) = maxpool1d(&x, 2, 2).unwrap();
        assert_eq!(y.values(), &[3.0, 2.0]);
        assert_eq!(argmax, vec![1, 2]);
    }

    #[test]
    fn constant_input_ties_take_the_earlier_index() {
        let x = Tensor::filled(&[1, 2, 6], 0.5f64);
        let (y, argmax) = maxpool1d(&x, 2, 2).unwrap();
        assert!(y.iter().all(|&v| v == 0.5));
        assert_eq!(argmax, vec![0, 2, 4, 6, 8, 10]);
    }

    #[test]
    fn backward_routes_to_argmax_positions() {
        let x = Tensor::from_values(&[1, 1, 5], vec![1.0f64, 3.0, 2.0, 2.0, 5.0]);
        let (_, argmax) = maxpool1d(&x, 2, 2).unwrap();
        let up = Tensor::from_values(&[1, 1, 2], vec![1.0, 1.0]);
        let dx = maxpool1d_backward(&[1, 1, 5], &argmax, &up).unwrap();
        assert_eq!(dx.values(), &[0.0, 1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn window_longer_than_input_is_rejected() {
        let x = Tensor::<f32>::zeros(&[1, 1, 1]);
        assert!(matches!(maxpool1d(&x, 2, 2), Err(NnError::Shape(_))));
    }
}
