//! Gated recurrent unit with full backpropagation through time.
//!
//! Gate convention: the update gate interpolates *toward* the candidate,
//! `h <- (1 - z) * h + z * h_cand`. The backward pass stores only the
//! hidden-state trajectory and recomputes the gates step by step, which
//! keeps memory linear in `time * hidden` instead of four times that.

use rand::Rng;

use crate::nn::activations::sigmoid_scalar;
use crate::nn::init::glorot_uniform;
use crate::nn::NnError;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Nine parameter blocks: input-to-hidden `w_*` of shape `(hidden, input)`,
/// hidden-to-hidden `u_*` of shape `(hidden, hidden)`, biases `b_*`.
#[derive(Clone, Debug)]
pub struct GruLayer<T> {
    pub w_z: Tensor<T>,
    pub w_r: Tensor<T>,
    pub w_h: Tensor<T>,
    pub u_z: Tensor<T>,
    pub u_r: Tensor<T>,
    pub u_h: Tensor<T>,
    pub b_z: Tensor<T>,
    pub b_r: Tensor<T>,
    pub b_h: Tensor<T>,
}

/// Hidden-state trajectory of one forward call: `hidden_states` holds
/// `h_1 .. h_T` as `(batch, time, hidden)` and doubles as the cache the
/// backward pass consumes.
pub struct GruForward<T> {
    pub hidden_states: Tensor<T>,
    pub final_hidden: Tensor<T>,
}

pub struct GruGrads<T> {
    pub inputs: Tensor<T>,
    pub w_z: Tensor<T>,
    pub w_r: Tensor<T>,
    pub w_h: Tensor<T>,
    pub u_z: Tensor<T>,
    pub u_r: Tensor<T>,
    pub u_h: Tensor<T>,
    pub b_z: Tensor<T>,
    pub b_r: Tensor<T>,
    pub b_h: Tensor<T>,
    pub h0: Tensor<T>,
}

#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

impl<T: Scalar> GruLayer<T> {
    pub fn glorot(hidden: usize, input: usize, rng: &mut impl Rng) -> Self {
        GruLayer {
            w_z: glorot_uniform(&[hidden, input], input, hidden, rng),
            w_r: glorot_uniform(&[hidden, input], input, hidden, rng),
            w_h: glorot_uniform(&[hidden, input], input, hidden, rng),
            u_z: glorot_uniform(&[hidden, hidden], hidden, hidden, rng),
            u_r: glorot_uniform(&[hidden, hidden], hidden, hidden, rng),
            u_h: glorot_uniform(&[hidden, hidden], hidden, hidden, rng),
            b_z: Tensor::zeros(&[hidden]),
            b_r: Tensor::zeros(&[hidden]),
            b_h: Tensor::zeros(&[hidden]),
        }
    }

    pub fn zeros(hidden: usize, input: usize) -> Self {
        GruLayer {
            w_z: Tensor::zeros(&[hidden, input]),
            w_r: Tensor::zeros(&[hidden, input]),
            w_h: Tensor::zeros(&[hidden, input]),
            u_z: Tensor::zeros(&[hidden, hidden]),
            u_r: Tensor::zeros(&[hidden, hidden]),
            u_h: Tensor::zeros(&[hidden, hidden]),
            b_z: Tensor::zeros(&[hidden]),
            b_r: Tensor::zeros(&[hidden]),
            b_h: Tensor::zeros(&[hidden]),
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.w_z.dim(0)
    }

    pub fn input_size(&self) -> usize {
        self.w_z.dim(1)
    }

    fn check_inputs(&self, inputs: &Tensor<T>, h0: Option<&Tensor<T>>) -> Result<(), NnError> {
        if inputs.rank() != 3 || inputs.dim(2) != self.input_size() {
            return Err(NnError::Shape(format!(
                "gru expects (batch, time, {}), got {:?}",
                self.input_size(),
                inputs.shape()
            )));
        }
        if inputs.dim(1) == 0 {
            return Err(NnError::Shape("gru needs at least one time step".into()));
        }
        if let Some(h0) = h0 {
            if h0.shape() != [inputs.dim(0), self.hidden_size()] {
                return Err(NnError::Shape(format!(
                    "gru h0 must be ({}, {}), got {:?}",
                    inputs.dim(0),
                    self.hidden_size(),
                    h0.shape()
                )));
            }
        }
        Ok(())
    }

    /// Computes the gates for one `(batch, step)` pair into the scratch
    /// buffers. `h_prev` is the incoming hidden state for that sample.
    #[inline]
    fn step_gates(
        &self,
        x: &[T],
        h_prev: &[T],
        z: &mut [T],
        r: &mut [T],
        rh: &mut [T],
        h_cand: &mut [T],
    ) {
        let hidden = self.hidden_size();
        for j in 0..hidden {
            let az = dot(self.w_z.row2(j), x) + dot(self.u_z.row2(j), h_prev) + self.b_z.values()[j];
            let ar = dot(self.w_r.row2(j), x) + dot(self.u_r.row2(j), h_prev) + self.b_r.values()[j];
            z[j] = sigmoid_scalar(az);
            r[j] = sigmoid_scalar(ar);
        }
        for j in 0..hidden {
            rh[j] = r[j] * h_prev[j];
        }
        for j in 0..hidden {
            let ah = dot(self.w_h.row2(j), x) + dot(self.u_h.row2(j), rh) + self.b_h.values()[j];
            h_cand[j] = ah.tanh();
        }
    }

    /// Runs the recurrence over `(batch, time, input)`; `h0` defaults to
    /// zeros.
    pub fn forward(&self, inputs: &Tensor<T>, h0: Option<&Tensor<T>>) -> Result<GruForward<T>, NnError> {
        self.check_inputs(inputs, h0)?;
        let (batch, time, _) = (inputs.dim(0), inputs.dim(1), inputs.dim(2));
        let hidden = self.hidden_size();

        let mut states = Tensor::zeros(&[batch, time, hidden]);
        let mut h_prev = match h0 {
            Some(h) => h.clone(),
            None => Tensor::zeros(&[batch, hidden]),
        };
        let mut z = vec![T::zero(); hidden];
        let mut r = vec![T::zero(); hidden];
        let mut rh = vec![T::zero(); hidden];
        let mut h_cand = vec![T::zero(); hidden];

        for t in 0..time {
            for b in 0..batch {
                let x = inputs.row3(b, t);
                let hp = h_prev.row2(b).to_vec();
                self.step_gates(x, &hp, &mut z, &mut r, &mut rh, &mut h_cand);
                let out = states.row3_mut(b, t);
                for j in 0..hidden {
                    out[j] = (T::one() - z[j]) * hp[j] + z[j] * h_cand[j];
                }
                h_prev.row2_mut(b).copy_from_slice(out);
            }
        }
        Ok(GruForward {
            final_hidden: h_prev,
            hidden_states: states,
        })
    }

    /// Exact gradients through every time step. `hidden_states` must be
    /// the trajectory returned by the matching [`GruLayer::forward`] call;
    /// `upstream` carries dLoss/dh_t for every step (zero-filled except at
    /// the last step when only the final state feeds the loss).
    pub fn backward(
        &self,
        inputs: &Tensor<T>,
        h0: Option<&Tensor<T>>,
        hidden_states: &Tensor<T>,
        upstream: &Tensor<T>,
    ) -> Result<GruGrads<T>, NnError> {
        self.check_inputs(inputs, h0)?;
        let (batch, time, input_n) = (inputs.dim(0), inputs.dim(1), inputs.dim(2));
        let hidden = self.hidden_size();
        if hidden_states.shape() != [batch, time, hidden] {
            return Err(NnError::State(format!(
                "hidden-state cache {:?} does not match inputs ({batch}, {time}, {hidden})",
                hidden_states.shape()
            )));
        }
        if upstream.shape() != [batch, time, hidden] {
            return Err(NnError::Shape(format!(
                "gru upstream must be ({batch}, {time}, {hidden}), got {:?}",
                upstream.shape()
            )));
        }

        let mut g = GruGrads {
            inputs: Tensor::zeros(inputs.shape()),
            w_z: Tensor::zeros(self.w_z.shape()),
            w_r: Tensor::zeros(self.w_r.shape()),
            w_h: Tensor::zeros(self.w_h.shape()),
            u_z: Tensor::zeros(self.u_z.shape()),
            u_r: Tensor::zeros(self.u_r.shape()),
            u_h: Tensor::zeros(self.u_h.shape()),
            b_z: Tensor::zeros(&[hidden]),
            b_r: Tensor::zeros(&[hidden]),
            b_h: Tensor::zeros(&[hidden]),
            h0: Tensor::zeros(&[batch, hidden]),
        };

        let zeros_h0 = Tensor::zeros(&[batch, hidden]);
        let h0_ref = h0.unwrap_or(&zeros_h0);

        // dL/dh_t carried backward across steps, per sample.
        let mut carry = Tensor::zeros(&[batch, hidden]);

        let mut z = vec![T::zero(); hidden];
        let mut r = vec![T::zero(); hidden];
        let mut rh = vec![T::zero(); hidden];
        let mut h_cand = vec![T::zero(); hidden];
        let mut d_rh = vec![T::zero(); hidden];
        let mut d_hp = vec![T::zero(); hidden];
        let mut daz = vec![T::zero(); hidden];
        let mut dar = vec![T::zero(); hidden];
        let mut dah = vec![T::zero(); hidden];

        for t in (0..time).rev() {
            for b in 0..batch {
                let x = inputs.row3(b, t);
                let hp: Vec<T> = if t == 0 {
                    h0_ref.row2(b).to_vec()
                } else {
                    hidden_states.row3(b, t - 1).to_vec()
                };
                self.step_gates(x, &hp, &mut z, &mut r, &mut rh, &mut h_cand);

                let up = upstream.row3(b, t);
                let carry_row = carry.row2(b).to_vec();
                d_rh.fill(T::zero());
                for j in 0..hidden {
                    let dh = up[j] + carry_row[j];
                    let dhc = dh * z[j];
                    let dz = dh * (h_cand[j] - hp[j]);
                    d_hp[j] = dh * (T::one() - z[j]);
                    dah[j] = dhc * (T::one() - h_cand[j] * h_cand[j]);
                    daz[j] = dz * z[j] * (T::one() - z[j]);
                }
                // d(r * h_prev) = U_h^T dah, accumulated row by row.
                for j in 0..hidden {
                    let a = dah[j];
                    if a == T::zero() {
                        continue;
                    }
                    for (dst, &u) in d_rh.iter_mut().zip(self.u_h.row2(j)) {
                        *dst = *dst + a * u;
                    }
                }
                for j in 0..hidden {
                    let dr = d_rh[j] * hp[j];
                    d_hp[j] += d_rh[j] * r[j];
                    dar[j] = dr * r[j] * (T::one() - r[j]);
                }

                // Parameter gradients for this step.
                for j in 0..hidden {
                    g.b_z.values_mut()[j] += daz[j];
                    g.b_r.values_mut()[j] += dar[j];
                    g.b_h.values_mut()[j] += dah[j];
                }
                accumulate_outer(&mut g.w_z, &daz, x);
                accumulate_outer(&mut g.w_r, &dar, x);
                accumulate_outer(&mut g.w_h, &dah, x);
                accumulate_outer(&mut g.u_z, &daz, &hp);
                accumulate_outer(&mut g.u_r, &dar, &hp);
                accumulate_outer(&mut g.u_h, &dah, &rh);

                // Remaining flow into h_prev through the z and r gates.
                for j in 0..hidden {
                    let az = daz[j];
                    if az != T::zero() {
                        for (dst, &u) in d_hp.iter_mut().zip(self.u_z.row2(j)) {
                            *dst = *dst + az * u;
                        }
                    }
                    let ar = dar[j];
                    if ar != T::zero() {
                        for (dst, &u) in d_hp.iter_mut().zip(self.u_r.row2(j)) {
                            *dst = *dst + ar * u;
                        }
                    }
                }

                // Input gradient: W^T contributions from all three gates.
                {
                    let dx = g.inputs.row3_mut(b, t);
                    for j in 0..hidden {
                        let (az, ar, ah) = (daz[j], dar[j], dah[j]);
                        let wz = self.w_z.row2(j);
                        let wr = self.w_r.row2(j);
                        let wh = self.w_h.row2(j);
                        for i in 0..input_n {
                            dx[i] = dx[i] + az * wz[i] + ar * wr[i] + ah * wh[i];
                        }
                    }
                }

                if t == 0 {
                    g.h0.row2_mut(b).copy_from_slice(&d_hp);
                } else {
                    carry.row2_mut(b).copy_from_slice(&d_hp);
                }
            }
        }
        Ok(g)
    }
}

/// `grad[j, :] += scale[j] * vec` for a `(rows, cols)` gradient block.
#[inline]
fn accumulate_outer<T: Scalar>(grad: &mut Tensor<T>, scale: &[T], vec: &[T]) {
    let cols = grad.dim(1);
    for (j, &s) in scale.iter().enumerate() {
        if s == T::zero() {
            continue;
        }
        let row = &mut grad.values_mut()[j * cols..(j + 1) * cols];
        for (dst, &v) in row.iter_mut().zip(vec) {
            *dst = *dst + s * v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{central_diff_grad, max_rel_error};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_parameters_keep_the_state_at_zero() {
        let gru = GruLayer::<f64>::zeros(4, 3);
        let inputs = Tensor::from_fn(&[2, 6, 3], |i| (i as f64 * 0.31).sin());
        let out = gru.forward(&inputs, None).unwrap();
        assert!(out.hidden_states.iter().all(|&v| v == 0.0));
        assert!(out.final_hidden.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scalar_recurrence_matches_hand_evaluation() {
        // w_h = 1, everything else zero, x = [1]:
        // z = 0.5, h_cand = tanh(1), h = 0.5 * tanh(1).
        let mut gru = GruLayer::<f64>::zeros(1, 1);
        gru.w_h = Tensor::from_values(&[1, 1], vec![1.0]);
        let inputs = Tensor::from_values(&[1, 1, 1], vec![1.0]);
        let out = gru.forward(&inputs, None).unwrap();
        let expected = 0.5 * 1.0f64.tanh();
        assert!((out.final_hidden.values()[0] - expected).abs() < 1e-5);
        assert!((out.final_hidden.values()[0] - 0.38080).abs() < 1e-5);
    }

    #[test]
    fn states_stay_strictly_inside_the_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let gru = GruLayer::<f64>::glorot(6, 4, &mut rng);
        let inputs = Tensor::from_fn(&[3, 20, 4], |i| ((i * 17 % 23) as f64 - 11.0) / 3.0);
        let out = gru.forward(&inputs, None).unwrap();
        assert!(out.hidden_states.iter().all(|&v| v.abs() < 1.0));
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let gru = GruLayer::<f64>::glorot(3, 2, &mut rng);
        let inputs = Tensor::from_fn(&[2, 4, 2], |i| (i as f64 * 0.7).cos());
        let fwd = gru.forward(&inputs, None).unwrap();
        let up = Tensor::zeros(&[2, 4, 3]);
        let g = gru.backward(&inputs, None, &fwd.hidden_states, &up).unwrap();
        assert!(g.inputs.iter().all(|&v| v == 0.0));
        assert!(g.w_h.iter().all(|&v| v == 0.0));
        assert!(g.u_r.iter().all(|&v| v == 0.0));
        assert!(g.h0.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mismatched_cache_is_a_state_error() {
        let gru = GruLayer::<f64>::zeros(3, 2);
        let inputs = Tensor::zeros(&[2, 4, 2]);
        let bad_cache = Tensor::zeros(&[2, 3, 3]);
        let up = Tensor::zeros(&[2, 4, 3]);
        assert!(matches!(
            gru.backward(&inputs, None, &bad_cache, &up),
            Err(NnError::State(_))
        ));
    }

    fn flatten_params(gru: &GruLayer<f64>) -> Vec<f64> {
        [
            &gru.w_z, &gru.w_r, &gru.w_h, &gru.u_z, &gru.u_r, &gru.u_h, &gru.b_z, &gru.b_r,
            &gru.b_h,
        ]
        .iter()
        .flat_map(|t| t.values().to_vec())
        .collect()
    }

    fn unflatten_params(template: &GruLayer<f64>, flat: &[f64]) -> GruLayer<f64> {
        let mut gru = template.clone();
        let mut cursor = 0;
        for t in [
            &mut gru.w_z, &mut gru.w_r, &mut gru.w_h, &mut gru.u_z, &mut gru.u_r, &mut gru.u_h,
            &mut gru.b_z, &mut gru.b_r, &mut gru.b_h,
        ] {
            let n = t.len();
            t.values_mut().copy_from_slice(&flat[cursor..cursor + n]);
            cursor += n;
        }
        gru
    }

    fn bptt_check(batch: usize, time: usize, hidden: usize, input: usize, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gru = GruLayer::<f64>::glorot(hidden, input, &mut rng);
        let inputs = Tensor::from_fn(&[batch, time, input], |i| ((i * 19 % 17) as f64 - 8.0) / 5.0);
        let h0 = Tensor::from_fn(&[batch, hidden], |i| ((i * 7 % 5) as f64 - 2.0) / 4.0);
        let up = Tensor::from_fn(&[batch, time, hidden], |i| ((i * 13 % 11) as f64 - 5.0) / 6.0);

        let fwd = gru.forward(&inputs, Some(&h0)).unwrap();
        let analytic = gru.backward(&inputs, Some(&h0), &fwd.hidden_states, &up).unwrap();

        let loss_for = |g: &GruLayer<f64>, xs: &Tensor<f64>, h0v: &Tensor<f64>| -> f64 {
            let f = g.forward(xs, Some(h0v)).unwrap();
            f.hidden_states.iter().zip(up.iter()).map(|(&h, &u)| h * u).sum()
        };

        let p0 = flatten_params(&gru);
        let num_p = central_diff_grad(
            |p| loss_for(&unflatten_params(&gru, p), &inputs, &h0),
            &p0,
            1e-3,
        );
        let analytic_p = [
            &analytic.w_z, &analytic.w_r, &analytic.w_h, &analytic.u_z, &analytic.u_r,
            &analytic.u_h, &analytic.b_z, &analytic.b_r, &analytic.b_h,
        ]
        .iter()
        .flat_map(|t| t.values().to_vec())
        .collect::<Vec<_>>();
        assert!(
            max_rel_error(&analytic_p, &num_p) < 1e-4,
            "parameter gradients disagree: {}",
            max_rel_error(&analytic_p, &num_p)
        );

        let x0 = inputs.values().to_vec();
        let num_x = central_diff_grad(
            |xv| loss_for(&gru, &Tensor::from_values(inputs.shape(), xv.to_vec()), &h0),
            &x0,
            1e-3,
        );
        assert!(max_rel_error(analytic.inputs.values(), &num_x) < 1e-4);

        let h0_flat = h0.values().to_vec();
        let num_h0 = central_diff_grad(
            |hv| loss_for(&gru, &inputs, &Tensor::from_values(h0.shape(), hv.to_vec())),
            &h0_flat,
            1e-3,
        );
        assert!(max_rel_error(analytic.h0.values(), &num_h0) < 1e-4);
    }

    #[test]
    fn single_step_gradients_match_finite_differences() {
        bptt_check(2, 1, 3, 4, 21);
    }

    #[test]
    fn five_step_gradients_match_finite_differences() {
        bptt_check(2, 5, 3, 4, 22);
    }
}
