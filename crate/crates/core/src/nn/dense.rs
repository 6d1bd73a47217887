//! Fully connected layer.

use rand::Rng;

use crate::nn::init::glorot_uniform;
use crate::nn::NnError;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Affine map `y = x Wᵀ + b` with `weights` of shape `(out, in)`.
#[derive(Clone, Debug)]
pub struct DenseLayer<T> {
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Gradients of one dense forward application.
pub struct DenseGrads<T> {
    pub input: Tensor<T>,
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> DenseLayer<T> {
    pub fn glorot(out_features: usize, in_features: usize, rng: &mut impl Rng) -> Self {
        DenseLayer {
            weights: glorot_uniform(&[out_features, in_features], in_features, out_features, rng),
            bias: Tensor::zeros(&[out_features]),
        }
    }

    pub fn out_features(&self) -> usize {
        self.weights.dim(0)
    }

    pub fn in_features(&self) -> usize {
        self.weights.dim(1)
    }

    /// `(batch, in) -> (batch, out)`.
    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        if input.rank() != 2 || input.dim(1) != self.in_features() {
            return Err(NnError::Shape(format!(
                "dense layer expects (batch, {}), got {:?}",
                self.in_features(),
                input.shape()
            )));
        }
        let batch = input.dim(0);
        let out_n = self.out_features();
        let mut out = Tensor::zeros(&[batch, out_n]);
        for b in 0..batch {
            let x = input.row2(b);
            for o in 0..out_n {
                let w = self.weights.row2(o);
                let dot: T = w.iter().zip(x).map(|(&wv, &xv)| wv * xv).sum();
                out.values_mut()[b * out_n + o] = dot + self.bias.values()[o];
            }
        }
        Ok(out)
    }

    /// Gradients for the forward call that produced `upstream` from `input`.
    pub fn backward(&self, input: &Tensor<T>, upstream: &Tensor<T>) -> Result<DenseGrads<T>, NnError> {
        let batch = input.dim(0);
        if upstream.shape() != [batch, self.out_features()] {
            return Err(NnError::Shape(format!(
                "dense backward expects upstream ({batch}, {}), got {:?}",
                self.out_features(),
                upstream.shape()
            )));
        }
        let out_n = self.out_features();
        let in_n = self.in_features();

        let mut d_input = Tensor::zeros(input.shape());
        let mut d_weights = Tensor::zeros(self.weights.shape());
        let mut d_bias = Tensor::zeros(self.bias.shape());

        for b in 0..batch {
            let x = input.row2(b);
            let g = upstream.row2(b);
            for o in 0..out_n {
                let gv = g[o];
                d_bias.values_mut()[o] += gv;
                let w_row = self.weights.row2(o);
                let dx_row = d_input.row2_mut(b);
                for (dx, &wv) in dx_row.iter_mut().zip(w_row) {
                    *dx = *dx + gv * wv;
                }
                let dw_row = &mut d_weights.values_mut()[o * in_n..(o + 1) * in_n];
                for (dw, &xv) in dw_row.iter_mut().zip(x) {
                    *dw = *dw + gv * xv;
                }
            }
        }
        Ok(DenseGrads {
            input: d_input,
            weights: d_weights,
            bias: d_bias,
        })
    }
}
