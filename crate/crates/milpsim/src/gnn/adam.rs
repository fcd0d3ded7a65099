//! Adam optimizer state over the flattened encoder parameters.

use super::backward::Gradients;
use super::model::EncoderModel;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(model: &EncoderModel) -> Self {
        let n = model.num_params();
        AdamState {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    /// One bias-corrected Adam step in place.
    pub fn step(&mut self, model: &mut EncoderModel, grads: &Gradients, lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - BETA1.powi(self.t as i32);
        let bc2 = 1.0 - BETA2.powi(self.t as i32);
        let mut offset = 0;
        let grad_tensors = grads.tensors();
        for (tensor, grad) in model.tensors_mut().into_iter().zip(grad_tensors) {
            for (i, (p, &g)) in tensor.iter_mut().zip(grad.iter()).enumerate() {
                let k = offset + i;
                self.m[k] = BETA1 * self.m[k] + (1.0 - BETA1) * g;
                self.v[k] = BETA2 * self.v[k] + (1.0 - BETA2) * g * g;
                let m_hat = self.m[k] / bc1;
                let v_hat = self.v[k] / bc2;
                *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
            }
            offset += grad.len();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnn::backward::Gradients;
    use crate::gnn::model::init_model_with_dims;
    use crate::gnn::model::ModelDims;

    #[test]
    fn zero_gradient_fresh_state_leaves_params_unchanged() {
        let dims = ModelDims {
            hidden: 4,
            out: 8,
            ..Default::default()
        };
        let mut model = init_model_with_dims(3, dims);
        let reference = model.clone();
        let grads = Gradients::zeros_like(&model);
        let mut adam = AdamState::new(&model);
        adam.step(&mut model, &grads, 1e-3);
        assert_eq!(model, reference);
        assert_eq!(adam.t, 1);
    }

    #[test]
    fn nonzero_gradient_moves_against_its_sign() {
        let dims = ModelDims {
            hidden: 4,
            out: 8,
            ..Default::default()
        };
        let mut model = init_model_with_dims(3, dims);
        let before = model.layers[0].cons_self[0];
        let mut grads = Gradients::zeros_like(&model);
        grads.layers[0].cons_self[0] = 1.0;
        let mut adam = AdamState::new(&model);
        adam.step(&mut model, &grads, 1e-3);
        assert!(model.layers[0].cons_self[0] < before);
    }
}
