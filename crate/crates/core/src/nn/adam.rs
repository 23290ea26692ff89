//! Adam with bias correction, operating on flat parameter vectors.

use crate::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    step: u64,
}

impl AdamState {
    pub fn new(param_count: usize, config: AdamConfig) -> Self {
        Self {
            config,
            first_moment: vec![0.0; param_count],
            second_moment: vec![0.0; param_count],
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn param_count(&self) -> usize {
        self.first_moment.len()
    }
}

/// One Adam update: m ← β₁m + (1-β₁)g, v ← β₂v + (1-β₂)g², with bias
/// correction baked into the step size. Increments the step counter by one.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.first_moment.len() {
        return Err(CoreError::Dimension(format!(
            "adam_step sizes disagree: params {}, grads {}, state {}",
            params.len(),
            grads.len(),
            state.first_moment.len()
        )));
    }
    state.step += 1;
    let c = state.config;
    let bias1 = 1.0 - c.beta1.powi(state.step as i32);
    let bias2 = 1.0 - c.beta2.powi(state.step as i32);
    for i in 0..params.len() {
        let g = grads[i];
        state.first_moment[i] = c.beta1 * state.first_moment[i] + (1.0 - c.beta1) * g;
        state.second_moment[i] = c.beta2 * state.second_moment[i] + (1.0 - c.beta2) * g * g;
        let m_hat = state.first_moment[i] / bias1;
        let v_hat = state.second_moment[i] / bias2;
        params[i] -= c.learning_rate * m_hat / (v_hat.sqrt() + c.epsilon);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradients_leave_params_unchanged() {
        let mut params = vec![0.5, -1.5, 2.0];
        let before = params.clone();
        let mut state = AdamState::new(3, AdamConfig::default());
        for _ in 0..25 {
            adam_step(&mut params, &[0.0, 0.0, 0.0], &mut state).unwrap();
        }
        assert_eq!(params, before);
        assert_eq!(state.step_count(), 25);
    }

    #[test]
    fn first_step_with_unit_gradient() {
        // m̂ = v̂ = 1 after bias correction, so Δ = -lr/(1+ε) ≈ -0.1.
        let mut params = vec![0.0];
        let mut state = AdamState::new(1, AdamConfig { learning_rate: 0.1, ..Default::default() });
        adam_step(&mut params, &[1.0], &mut state).unwrap();
        assert!((params[0] - (-0.1)).abs() < 1e-8, "got {}", params[0]);
    }

    #[test]
    fn identical_inputs_produce_identical_updates() {
        let grads = vec![0.3, -0.7];
        let mut a = vec![1.0, 2.0];
        let mut b = vec![1.0, 2.0];
        let mut sa = AdamState::new(2, AdamConfig::default());
        let mut sb = AdamState::new(2, AdamConfig::default());
        for _ in 0..10 {
            adam_step(&mut a, &grads, &mut sa).unwrap();
            adam_step(&mut b, &grads, &mut sb).unwrap();
        }
        assert_eq!(a, b);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut params = vec![0.0; 2];
        let mut state = AdamState::new(3, AdamConfig::default());
        assert!(adam_step(&mut params, &[0.0, 0.0], &mut state).is_err());
    }
}
