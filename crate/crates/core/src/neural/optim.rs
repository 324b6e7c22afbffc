use serde::{Deserialize, Serialize};

use super::params::{GradStore, ParamStore};
use super::tensor::Matrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl AdamWConfig {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        AdamWConfig { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub config: AdamWConfig,
    pub m: Vec<Matrix>,
    pub v: Vec<Matrix>,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(config: AdamWConfig, params: &ParamStore) -> Self {
        let zeros: Vec<Matrix> =
            params.ids().map(|id| Matrix::zeros(params.get(id).rows, params.get(id).cols)).collect();
        OptimizerState { config, m: zeros.clone(), v: zeros, step: 0 }
    }
}

/// One AdamW update: bias-corrected moments, then decoupled decay
/// `w ← w − lr·λ·w` on the pre-update weights. Nothing is modified when any
/// gradient is non-finite.
pub fn adamw_step(state: &mut OptimizerState, params: &mut ParamStore, grads: &GradStore) -> Result<()> {
    if state.m.len() != params.len() {
        return Err(Error::Data("optimizer state does not match the parameters".into()));
    }
    for id in params.ids() {
        let g = grads.get(id);
        if g.shape() != params.get(id).shape() {
            return Err(Error::Data(format!("gradient shape mismatch for `{}`", params.name(id))));
        }
        if !g.all_finite() {
            return Err(Error::NonFiniteGradient(params.name(id).to_string()));
        }
    }
    state.step += 1;
    let c = state.config;
    let t = state.step as i32;
    let bc1 = 1.0 - c.beta1.powi(t);
    let bc2 = 1.0 - c.beta2.powi(t);
    for (k, id) in params.ids().enumerate() {
        let g = grads.get(id);
        let m = &mut state.m[k];
        let v = &mut state.v[k];
        let w = params.get_mut(id);
        for j in 0..w.data.len() {
            let gj = g.data[j];
            m.data[j] = c.beta1 * m.data[j] + (1.0 - c.beta1) * gj;
            v.data[j] = c.beta2 * v.data[j] + (1.0 - c.beta2) * gj * gj;
            let m_hat = m.data[j] / bc1;
            let v_hat = v.data[j] / bc2;
            let before = w.data[j];
            w.data[j] = before - c.lr * m_hat / (v_hat.sqrt() + c.eps) - c.lr * c.weight_decay * before;
        }
    }
    Ok(())
}
