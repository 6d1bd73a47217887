//! Recurrent stream: a GRU over the frame sequence, with the final hidden
//! state projected to the shared stream width.

use rand::Rng;

use crate::model::ModelError;
use crate::nn::{DenseLayer, GruLayer};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub struct RecurrentStream<T> {
    pub gru: GruLayer<T>,
    pub fc: DenseLayer<T>,
}

pub struct RnnStreamCache<T> {
    inputs: Tensor<T>,
    hidden_states: Tensor<T>,
    final_hidden: Tensor<T>,
}

impl<T: Scalar> RecurrentStream<T> {
    pub fn new(hidden: usize, input: usize, stream_features: usize, rng: &mut impl Rng) -> Self {
        RecurrentStream {
            gru: GruLayer::glorot(hidden, input, rng),
            fc: DenseLayer::glorot(stream_features, hidden, rng),
        }
    }

    /// `(batch, time, features) -> (batch, stream_features)`.
    pub fn forward(&self, inputs: &Tensor<T>) -> Result<(Tensor<T>, RnnStreamCache<T>), ModelError> {
        let run = self.gru.forward(inputs, None)?;
        let out = self.fc.forward(&run.final_hidden)?;
        Ok((
            out,
            RnnStreamCache {
                inputs: inputs.clone(),
                hidden_states: run.hidden_states,
                final_hidden: run.final_hidden,
            },
        ))
    }

    pub fn forward_eval(&self, inputs: &Tensor<T>) -> Result<Tensor<T>, ModelError> {
        let run = self.gru.forward(inputs, None)?;
        Ok(self.fc.forward(&run.final_hidden)?)
    }

    /// Parameter gradients in [`Self::param_names`] order.
    pub fn backward(&self, cache: &RnnStreamCache<T>, upstream: &Tensor<T>) -> Result<Vec<Tensor<T>>, ModelError> {
        let fc_grads = self.fc.backward(&cache.final_hidden, upstream)?;

        // Only the last hidden state feeds the projection.
        let (batch, time, _) = (
            cache.hidden_states.dim(0),
            cache.hidden_states.dim(1),
            cache.hidden_states.dim(2),
        );
        let hidden = self.gru.hidden_size();
        let mut through_time = Tensor::zeros(&[batch, time, hidden]);
        for b in 0..batch {
            through_time
                .row3_mut(b, time - 1)
                .copy_from_slice(fc_grads.input.row2(b));
        }
        let g = self.gru.backward(&cache.inputs, None, &cache.hidden_states, &through_time)?;
        Ok(vec![
            g.w_z, g.w_r, g.w_h, g.u_z, g.u_r, g.u_h, g.b_z, g.b_r, g.b_h, fc_grads.weights,
            fc_grads.bias,
        ])
    }

    pub fn param_names(prefix: &str, out: &mut Vec<String>) {
        for gate in ["w_z", "w_r", "w_h", "u_z", "u_r", "u_h", "b_z", "b_r", "b_h"] {
            out.push(format!("{prefix}.gru.{gate}"));
        }
        out.push(format!("{prefix}.fc.weight"));
        out.push(format!("{prefix}.fc.bias"));
    }

    pub fn params(&self) -> Vec<&Tensor<T>> {
        vec![
            &self.gru.w_z,
            &self.gru.w_r,
            &self.gru.w_h,
            &self.gru.u_z,
            &self.gru.u_r,
            &self.gru.u_h,
            &self.gru.b_z,
            &self.gru.b_r,
            &self.gru.b_h,
            &self.fc.weights,
            &self.fc.bias,
        ]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        vec![
            &mut self.gru.w_z,
            &mut self.gru.w_r,
            &mut self.gru.w_h,
            &mut self.gru.u_z,
            &mut self.gru.u_r,
            &mut self.gru.u_h,
            &mut self.gru.b_z,
            &mut self.gru.b_r,
            &mut self.gru.b_h,
            &mut self.fc.weights,
            &mut self.fc.bias,
        ]
    }
}
