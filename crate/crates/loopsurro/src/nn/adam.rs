//! Adam optimizer with bias correction.

use crate::error::{Error, Result};

use super::{Gradients, MlpNetwork};

#[derive(Debug, Clone)]
pub struct AdamState {
    first_moment: Gradients,
    second_moment: Gradients,
    step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(net: &MlpNetwork) -> Self {
        AdamState {
            first_moment: Gradients::zeros_like(net),
            second_moment: Gradients::zeros_like(net),
            step_count: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }
}

/// One Adam update over all parameters. Rejects non-finite gradients with an
/// error naming the offending parameter block.
pub fn adam_step(
    net: &mut MlpNetwork,
    grads: &Gradients,
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    if !(lr > 0.0) {
        return Err(Error::Config(format!("learning rate must be positive, got {lr}")));
    }
    for (idx, w) in grads.weights.iter().enumerate() {
        if !w.is_finite() {
            return Err(Error::Diverged(format!(
                "non-finite gradient in layer {idx} weights"
            )));
        }
    }
    for (idx, b) in grads.biases.iter().enumerate() {
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged(format!("non-finite gradient in layer {idx} bias")));
        }
    }

    state.step_count += 1;
    let t = state.step_count as i32;
    let bias1 = 1.0 - state.beta1.powi(t);
    let bias2 = 1.0 - state.beta2.powi(t);
    let (beta1, beta2, eps) = (state.beta1, state.beta2, state.epsilon);

    let update = |param: &mut [f64], grad: &[f64], m: &mut [f64], v: &mut [f64]| {
        for i in 0..param.len() {
            let g = grad[i];
            m[i] = beta1 * m[i] + (1.0 - beta1) * g;
            v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
            let m_hat = m[i] / bias1;
            let v_hat = v[i] / bias2;
            param[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    };

    for (idx, layer) in net.layers_mut().iter_mut().enumerate() {
        update(
            layer.weight.data_mut(),
            grads.weights[idx].data(),
            state.first_moment.weights[idx].data_mut(),
            state.second_moment.weights[idx].data_mut(),
        );
        update(
            &mut layer.bias,
            &grads.biases[idx],
            &mut state.first_moment.biases[idx],
            &mut state.second_moment.biases[idx],
        );
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_network, Activation};

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut net = init_network(&[1, 1], Activation::Identity, 5).unwrap();
        let before = net.layers()[0].weight.get(0, 0);
        let mut state = AdamState::new(&net);
        let mut grads = Gradients::zeros_like(&net);
        grads.weights[0].set(0, 0, 0.3); // |g| >> eps
        adam_step(&mut net, &grads, &mut state, 1e-3).unwrap();
        let after = net.layers()[0].weight.get(0, 0);
        // Bias-corrected first step is -lr * g/|g| up to the eps term.
        assert!((after - (before - 1e-3)).abs() < 1e-9);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn zero_gradient_keeps_parameters() {
        let mut net = init_network(&[2, 3, 1], Activation::ReLU, 1).unwrap();
        let snapshot = net.clone();
        let mut state = AdamState::new(&net);
        let grads = Gradients::zeros_like(&net);
        adam_step(&mut net, &grads, &mut state, 1e-2).unwrap();
        assert_eq!(net, snapshot);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn identical_calls_give_identical_results() {
        let run = || {
            let mut net = init_network(&[2, 4, 1], Activation::ReLU, 7).unwrap();
            let mut state = AdamState::new(&net);
            let mut grads = Gradients::zeros_like(&net);
            for (i, v) in grads.weights[0].data_mut().iter_mut().enumerate() {
                *v = 0.1 * (i as f64 + 1.0);
            }
            adam_step(&mut net, &grads, &mut state, 3e-4).unwrap();
            adam_step(&mut net, &grads, &mut state, 3e-4).unwrap();
            net
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn non_finite_gradient_is_rejected_with_block_name() {
        let mut net = init_network(&[2, 3, 1], Activation::ReLU, 2).unwrap();
        let mut state = AdamState::new(&net);
        let mut grads = Gradients::zeros_like(&net);
        grads.biases[1][0] = f64::NAN;
        let err = adam_step(&mut net, &grads, &mut state, 1e-3).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("layer 1 bias"), "unexpected message: {msg}");
    }
}
