use serde::{Deserialize, Serialize};

use crate::error::{NgcError, Result};
use crate::model::{Gradients, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    /// Global gradient-norm ceiling.
    pub clip: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            lr: 5e-6,
            beta1: 0.9,
            beta2: 0.95,
            eps: 1e-15,
            weight_decay: 0.0,
            clip: 1.0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || !(self.clip > 0.0) || !(self.eps > 0.0) {
            return Err(NgcError::Config("lr, clip and eps must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(NgcError::Config("betas must lie in [0, 1)".into()));
        }
        if self.weight_decay < 0.0 {
            return Err(NgcError::Config("weight decay must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Adaptive-moment optimizer with decoupled weight decay.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamW {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    pub step: u64,
}

impl AdamW {
    pub fn new(params: &ModelParams) -> Self {
        let zeros = Gradients::zeros_like(params).tensors;
        Self {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }

    /// Clips `grads` to `config.clip` global norm and updates `params`.
    /// Returns the pre-clip norm. Non-finite gradients abort the step
    /// without touching anything.
    pub fn update(&mut self, params: &mut ModelParams, grads: &Gradients, config: &OptimizerConfig) -> Result<f64> {
        if !grads.is_finite() {
            return Err(NgcError::Numeric(format!("non-finite gradient at optimizer step {}", self.step + 1)));
        }
        if grads.tensors.len() != self.m.len() {
            return Err(NgcError::Dimension("gradients do not match the optimizer state".into()));
        }
        let norm = grads.global_norm();
        let factor = if norm > config.clip { config.clip / norm } else { 1.0 };
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - config.beta1.powi(t);
        let bc2 = 1.0 - config.beta2.powi(t);
        for (((tensor, g), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(&grads.tensors)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for (((p, &g), m), v) in tensor.values.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                let g = g * factor;
                *m = config.beta1 * *m + (1.0 - config.beta1) * g;
                *v = config.beta2 * *v + (1.0 - config.beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= config.lr * (m_hat / (v_hat.sqrt() + config.eps) + config.weight_decay * *p);
            }
        }
        Ok(norm)
    }
}

/// One optimizer step; see [`AdamW::update`].
pub fn optimizer_step(
    optimizer: &mut AdamW,
    params: &mut ModelParams,
    grads: &Gradients,
    config: &OptimizerConfig,
) -> Result<f64> {
    optimizer.update(params, grads, config)
}
