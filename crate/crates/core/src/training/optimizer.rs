use serde::{Deserialize, Serialize};

use super::TrainingError;
use crate::model::{EncoderConfig, ModelParams};
use crate::scalar::Scalar;

/// Hyperparameters of the AdamW update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-3, weight_decay: 0.01, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// First and second moments plus the number of updates applied.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T> {
    pub m: ModelParams<T>,
    pub v: ModelParams<T>,
    pub t: u64,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(cfg: &EncoderConfig) -> Self {
        Self { m: ModelParams::zeros(cfg), v: ModelParams::zeros(cfg), t: 0 }
    }
}

/// One AdamW update with decoupled weight decay:
/// `theta -= lr * (m_hat / (sqrt(v_hat) + eps) + lambda * theta)`.
/// A non-finite gradient leaves parameters and state untouched.
pub fn adamw_step<T: Scalar>(
    params: &mut ModelParams<T>,
    grads: &ModelParams<T>,
    state: &mut OptimizerState<T>,
    cfg: &AdamWConfig,
) -> Result<(), TrainingError> {
    if !grads.is_finite() {
        return Err(TrainingError::NonFiniteGradient);
    }
    state.t += 1;
    let t = state.t as i32;
    let (b1, b2) = (T::lit(cfg.beta1), T::lit(cfg.beta2));
    let c1 = T::one() - T::lit(cfg.beta1.powi(t));
    let c2 = T::one() - T::lit(cfg.beta2.powi(t));
    let (lr, eps, wd) = (T::lit(cfg.learning_rate), T::lit(cfg.epsilon), T::lit(cfg.weight_decay));
    let tensors = params
        .tensors_mut()
        .into_iter()
        .zip(grads.tensors())
        .zip(state.m.tensors_mut())
        .zip(state.v.tensors_mut());
    for (((p, g), m), v) in tensors {
        for i in 0..p.data.len() {
            let gi = g.data[i];
            m.data[i] = b1 * m.data[i] + (T::one() - b1) * gi;
            v.data[i] = b2 * v.data[i] + (T::one() - b2) * gi * gi;
            let m_hat = m.data[i] / c1;
            let v_hat = v.data[i] / c2;
            p.data[i] = p.data[i] - lr * (m_hat / (v_hat.sqrt() + eps) + wd * p.data[i]);
        }
    }
    Ok(())
}

/// Result of feeding one validation metric to [`EarlyStopping`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Observation {
    pub is_best: bool,
    pub stop: bool,
}

/// Stops after `patience` consecutive evaluations without improvement.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    pub patience: usize,
    pub higher_is_better: bool,
    pub best: Option<f64>,
    pub best_step: Option<u64>,
    pub since_best: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize, higher_is_better: bool) -> Self {
        Self { patience, higher_is_better, best: None, best_step: None, since_best: 0 }
    }

    pub fn observe(&mut self, step: u64, metric: f64) -> Observation {
        let improved = match self.best {
            None => true,
            Some(b) if self.higher_is_better => metric > b,
            Some(b) => metric < b,
        };
        if improved {
            self.best = Some(metric);
            self.best_step = Some(step);
            self.since_best = 0;
        } else {
            self.since_best += 1;
        }
        Observation { is_best: improved, stop: self.since_best >= self.patience }
    }
}
