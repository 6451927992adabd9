//! AdamW with decoupled weight decay and a cosine learning-rate schedule.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::Weights;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub lr_max: f64,
    pub lr_min: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig { lr_max: 3e-4, lr_min: 1e-6, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 1e-6 }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr_max > 0.0 && self.lr_min >= 0.0 && self.lr_min <= self.lr_max) {
            return Err(Error::config("train.optimizer.lr_max", "need 0 <= lr_min <= lr_max, lr_max > 0"));
        }
        for (key, b) in [("train.optimizer.beta1", self.beta1), ("train.optimizer.beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::config(key, "must lie in [0, 1)"));
            }
        }
        if !(self.eps > 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::config("train.optimizer.eps", "eps must be positive and weight_decay non-negative"));
        }
        Ok(())
    }
}

/// Cosine annealing from `lr_max` at step 0 to `lr_min` at `total_steps - 1`;
/// later steps stay at `lr_min`.
pub fn cosine_lr(cfg: &OptimizerConfig, step: usize, total_steps: usize) -> f64 {
    if total_steps <= 1 {
        return cfg.lr_max;
    }
    let span = (total_steps - 1) as f64;
    let t = (step as f64).min(span) / span;
    cfg.lr_min + 0.5 * (cfg.lr_max - cfg.lr_min) * (1.0 + (PI * t).cos())
}

/// First and second moments plus the number of updates taken.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Weights,
    pub v: Weights,
}

impl AdamState {
    pub fn new(like: &Weights) -> Self {
        AdamState { step: 0, m: Weights::zeros_like(like), v: Weights::zeros_like(like) }
    }
}

/// One AdamW update at learning rate `lr`. Rejects non-finite gradients
/// before touching any state.
pub fn optimizer_step(
    params: &mut Weights,
    grad: &Weights,
    state: &mut AdamState,
    cfg: &OptimizerConfig,
    lr: f64,
) -> Result<()> {
    for (name, g) in grad.blocks() {
        if !g.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteGradient(name));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    let decay = 1.0 - lr * cfg.weight_decay;
    let blocks = params.blocks_mut().into_iter().zip(grad.blocks()).zip(state.m.blocks_mut()).zip(state.v.blocks_mut());
    for ((((_, p), (_, g)), (_, m)), (_, v)) in blocks {
        for i in 0..p.len() {
            let gi = g[i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] = p[i] * decay - lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}
