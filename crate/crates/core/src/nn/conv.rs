//! 1D convolution (cross-correlation) with stride 1 and same padding.

use rand::Rng;

use crate::nn::init::glorot_uniform;
use crate::nn::NnError;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Stride-1 convolution whose output length equals its input length.
/// Padding is `floor((k-1)/2)` on the left and `ceil((k-1)/2)` on the
/// right; `weights` has shape `(out_channels, in_channels, kernel)`.
#[derive(Clone, Debug)]
pub struct Conv1dLayer<T> {
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

pub struct Conv1dGrads<T> {
    pub input: Tensor<T>,
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> Conv1dLayer<T> {
    pub fn glorot(out_channels: usize, in_channels: usize, kernel: usize, rng: &mut impl Rng) -> Self {
        Conv1dLayer {
            weights: glorot_uniform(
                &[out_channels, in_channels, kernel],
                in_channels * kernel,
                out_channels * kernel,
                rng,
            ),
            bias: Tensor::zeros(&[out_channels]),
        }
    }

    pub fn out_channels(&self) -> usize {
        self.weights.dim(0)
    }

    pub fn in_channels(&self) -> usize {
        self.weights.dim(1)
    }

    pub fn kernel(&self) -> usize {
        self.weights.dim(2)
    }

    pub fn pad_left(&self) -> usize {
        (self.kernel() - 1) / 2
    }

    fn check_input(&self, input: &Tensor<T>) -> Result<(), NnError> {
        if input.rank() != 3 || input.dim(1) != self.in_channels() {
            return Err(NnError::Shape(format!(
                "conv1d expects (batch, {}, len), got {:?}",
                self.in_channels(),
                input.shape()
            )));
        }
        if input.dim(2) == 0 {
            return Err(NnError::Shape("conv1d input length is zero".into()));
        }
        Ok(())
    }

    /// `(batch, in_channels, len) -> (batch, out_channels, len)`.
    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        self.check_input(input)?;
        let (batch, in_ch, len) = (input.dim(0), input.dim(1), input.dim(2));
        let out_ch = self.out_channels();
        let k = self.kernel();
        let pad = self.pad_left() as isize;

        let mut out = Tensor::zeros(&[batch, out_ch, len]);
        let mut row = vec![T::zero(); len];
        for b in 0..batch {
            for oc in 0..out_ch {
                row.fill(self.bias.values()[oc]);
                for ic in 0..in_ch {
                    let x = input.row3(b, ic);
                    let w_base = (oc * in_ch + ic) * k;
                    for j in 0..k {
                        let w = self.weights.values()[w_base + j];
                        let shift = j as isize - pad;
                        let (y0, y1) = tap_range(len, shift);
                        if y0 >= y1 {
                            continue;
                        }
                        let x0 = (y0 as isize + shift) as usize;
                        for (y, &xv) in row[y0..y1].iter_mut().zip(&x[x0..x0 + (y1 - y0)]) {
                            *y = *y + w * xv;
                        }
                    }
                }
                out.row3_mut(b, oc).copy_from_slice(&row);
            }
        }
        Ok(out)
    }

    /// Gradients of the forward map; `bias` is `upstream` summed over
    /// batch and length.
    pub fn backward(&self, input: &Tensor<T>, upstream: &Tensor<T>) -> Result<Conv1dGrads<T>, NnError> {
        self.check_input(input)?;
        let (batch, in_ch, len) = (input.dim(0), input.dim(1), input.dim(2));
        let out_ch = self.out_channels();
        if upstream.shape() != [batch, out_ch, len] {
            return Err(NnError::Shape(format!(
                "conv1d backward expects upstream ({batch}, {out_ch}, {len}), got {:?}",
                upstream.shape()
            )));
        }
        let k = self.kernel();
        let pad = self.pad_left() as isize;

        let mut d_input = Tensor::zeros(input.shape());
        let mut d_weights = Tensor::zeros(self.weights.shape());
        let mut d_bias = Tensor::zeros(self.bias.shape());

        for oc in 0..out_ch {
            let mut acc = T::zero();
            for b in 0..batch {
                acc = acc + upstream.row3(b, oc).iter().copied().sum();
            }
            d_bias.values_mut()[oc] = acc;
        }

        let mut dx_row = vec![T::zero(); len];
        for b in 0..batch {
            for ic in 0..in_ch {
                dx_row.fill(T::zero());
                let x = input.row3(b, ic);
                for oc in 0..out_ch {
                    let g = upstream.row3(b, oc);
                    let w_base = (oc * in_ch + ic) * k;
                    for j in 0..k {
                        let shift = j as isize - pad;
                        let (y0, y1) = tap_range(len, shift);
                        if y0 >= y1 {
                            continue;
                        }
                        let x0 = (y0 as isize + shift) as usize;
                        let w = self.weights.values()[w_base + j];
                        // dL/dw[oc,ic,j] accumulates g · x over the valid span;
                        // dL/dx gets the transposed tap.
                        let mut dw = T::zero();
                        for ((dx, &gv), &xv) in dx_row[x0..x0 + (y1 - y0)]
                            .iter_mut()
                            .zip(&g[y0..y1])
                            .zip(&x[x0..x0 + (y1 - y0)])
                        {
                            dw = dw + gv * xv;
                            *dx = *dx + w * gv;
                        }
                        d_weights.values_mut()[w_base + j] += dw;
                    }
                }
                d_input.row3_mut(b, ic).copy_from_slice(&dx_row);
            }
        }
        Ok(Conv1dGrads {
            input: d_input,
            weights: d_weights,
            bias: d_bias,
        })
    }
}

/// Output index range `[y0, y1)` for which `y + shift` is a valid input
/// index in `[0, len)`.
#[inline]
fn tap_range(len: usize, shift: isize) -> (usize, usize) {
    let y0 = if shift < 0 { (-shift) as usize } else { 0 };
    let y1 = if shift > 0 { len.saturating_sub(shift as usize) } else { len };
    (y0, y1.max(y0))
}
