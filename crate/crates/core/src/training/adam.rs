//! Adam with bias-corrected moments.

use serde::{Deserialize, Serialize};

use crate::error::{dim_mismatch, GcsError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, ..Self::default() }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates and the step count for one parameter block.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }
}

/// One in-place Adam update of `params`.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, cfg: &AdamConfig) -> Result<()> {
    if grads.len() != params.len() {
        return Err(dim_mismatch("gradient", params.len(), grads.len()));
    }
    if state.m.len() != params.len() || state.v.len() != params.len() {
        return Err(dim_mismatch("optimizer state", params.len(), state.m.len()));
    }
    if !(cfg.lr > 0.0) {
        return Err(GcsError::Domain(format!("learning rate must be positive, got {}", cfg.lr)));
    }
    state.t += 1;
    let bc1 = 1.0 - cfg.beta1.powi(state.t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(state.t as i32);
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_keeps_params() {
        let mut p = vec![1.5, -2.0];
        let mut s = AdamState::new(2);
        adam_step(&mut p, &[0.0, 0.0], &mut s, &AdamConfig::default()).unwrap();
        assert_eq!(p, vec![1.5, -2.0]);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = vec![0.0];
        let mut s = AdamState::new(1);
        adam_step(&mut p, &[1.0], &mut s, &AdamConfig::with_lr(0.1)).unwrap();
        assert!((p[0] + 0.1).abs() < 1e-8);
    }

    #[test]
    fn two_steps_on_quadratic() {
        // f(x) = x^2, x0 = 1, lr = 0.1
        let cfg = AdamConfig::with_lr(0.1);
        let mut p = vec![1.0];
        let mut s = AdamState::new(1);
        adam_step(&mut p, &[2.0], &mut s, &cfg).unwrap();
        // m = 0.2, v = 0.004, m_hat = 2, v_hat = 4
        let x1 = 1.0 - 0.1 * 2.0 / (2.0 + 1e-8);
        assert!((p[0] - x1).abs() < 1e-12);
        let g2 = 2.0 * x1;
        adam_step(&mut p, &[g2], &mut s, &cfg).unwrap();
        let m2 = 0.9 * 0.2 + 0.1 * g2;
        let v2 = 0.999 * 0.004 + 0.001 * g2 * g2;
        let x2 = x1 - 0.1 * (m2 / (1.0 - 0.81)) / ((v2 / (1.0 - 0.999f64 * 0.999)).sqrt() + 1e-8);
        assert!((p[0] - x2).abs() < 1e-12);
    }

    #[test]
    fn shape_errors() {
        let mut p = vec![0.0; 3];
        let mut s = AdamState::new(3);
        assert!(matches!(
            adam_step(&mut p, &[1.0], &mut s, &AdamConfig::default()),
            Err(GcsError::DimensionMismatch(_))
        ));
        let mut s2 = AdamState::new(2);
        assert!(adam_step(&mut p, &[1.0; 3], &mut s2, &AdamConfig::default()).is_err());
    }
}
