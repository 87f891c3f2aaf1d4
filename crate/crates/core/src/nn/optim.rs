use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { learning_rate: 0.01, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Adam with bias-corrected moments.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    /// Number of steps taken.
    pub t: u64,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
}

impl AdamState {
    /// Fresh state with zero moments shaped like `params`.
    pub fn new(params: &[Tensor], config: AdamConfig) -> Self {
        let zeros = || params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        AdamState { config, t: 0, m: zeros(), v: zeros() }
    }

    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor]) -> Result<()> {
        if params.len() != grads.len() || params.len() != self.m.len() {
            return Err(Error::Shape(format!(
                "{} parameters, {} gradients, {} moment slots",
                params.len(),
                grads.len(),
                self.m.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != g.shape() || p.shape() != self.m[i].shape() {
                return Err(Error::Shape(format!("parameter {i}: {:?} vs gradient {:?}", p.shape(), g.shape())));
            }
        }
        self.t += 1;
        let AdamConfig { learning_rate, beta1, beta2, epsilon } = self.config;
        let c1 = 1.0 - beta1.powf(self.t as f64);
        let c2 = 1.0 - beta2.powf(self.t as f64);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            let moments = m.data_mut().iter_mut().zip(v.data_mut().iter_mut());
            for ((w, &gi), (mi, vi)) in p.data_mut().iter_mut().zip(g.data()).zip(moments) {
                *mi = beta1 * *mi + (1.0 - beta1) * gi;
                *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                let m_hat = *mi / c1;
                let v_hat = *vi / c2;
                *w -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}

/// One Adam update of `params` given `grads`.
pub fn adam_step(params: &mut [Tensor], grads: &[Tensor], state: &mut AdamState) -> Result<()> {
    state.step(params, grads)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Tensor {
        Tensor::new(vec![1], vec![v]).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut params = vec![Tensor::new(vec![2], vec![0.3, -1.2]).unwrap()];
        let before = params.clone();
        let mut state = AdamState::new(&params, AdamConfig::default());
        adam_step(&mut params, &[Tensor::zeros(&[2])], &mut state).unwrap();
        assert_eq!(params, before);
        assert_eq!(state.t, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut params = vec![scalar(1.0)];
        let mut state = AdamState::new(&params, AdamConfig::default());
        adam_step(&mut params, &[scalar(1.0)], &mut state).unwrap();
        // m_hat = 1, v_hat = 1: step = 0.01 / (1 + 1e-8)
        let want = 1.0 - 0.01 / (1.0 + 1e-8);
        assert!((params[0].data()[0] - want).abs() < 1e-15);
        assert!((params[0].data()[0] - 0.99).abs() < 1e-9);
    }

    #[test]
    fn quadratic_descends() {
        let mut params = vec![scalar(2.0)];
        let mut state = AdamState::new(&params, AdamConfig::default());
        let mut prev = f64::INFINITY;
        for step in 0..100 {
            let x = params[0].data()[0];
            adam_step(&mut params, &[scalar(x)], &mut state).unwrap();
            let now = params[0].data()[0].abs();
            if step >= 1 {
                assert!(now < prev, "step {step}: {now} !< {prev}");
            }
            prev = now;
        }
        assert!(state.v.iter().all(|v| v.data().iter().all(|&x| x >= 0.0)));
    }

    #[test]
    fn shape_mismatch() {
        let mut params = vec![scalar(1.0)];
        let mut state = AdamState::new(&params, AdamConfig::default());
        assert!(adam_step(&mut params, &[Tensor::zeros(&[2])], &mut state).is_err());
        assert!(adam_step(&mut params, &[], &mut state).is_err());
        assert_eq!(state.t, 0);
    }
}
