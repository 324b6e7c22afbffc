//! L2-regularized logistic regression trained by full-batch gradient descent
//! from a zero initialization.

use serde::{Deserialize, Serialize};

use super::{check_two_classes, FeatureClassifier, Probabilities};
use crate::error::{Error, Result};
use crate::features::SparseVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LogRegConfig {
    pub lr: f64,
    pub epochs: usize,
    pub l2_lambda: f64,
    /// Derived from the run seed. Full-batch descent from zero weights draws
    /// no randomness.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig { lr: 0.1, epochs: 200, l2_lambda: 1e-4, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub l2_lambda: f64,
    /// Objective before each epoch's update, then after the last one.
    pub loss_trace: Vec<f64>,
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean cross-entropy plus `l2/2 * |w|^2` and its gradient
/// `(grad_w, grad_b)`. `labels` holds 0/1 class indices.
pub fn objective(
    features: &[SparseVector],
    labels: &[usize],
    weights: &[f64],
    bias: f64,
    l2_lambda: f64,
) -> (f64, Vec<f64>, f64) {
    let n = features.len() as f64;
    let mut loss = 0.0;
    let mut grad_w = vec![0.0; weights.len()];
    let mut grad_b = 0.0;
    for (x, &y) in features.iter().zip(labels) {
        let z = x.dot(weights) + bias;
        let y = y as f64;
        loss += softplus(z) - y * z;
        let r = sigmoid(z) - y;
        for (i, v) in x.iter() {
            grad_w[i as usize] += r * v;
        }
        grad_b += r;
    }
    loss /= n;
    grad_b /= n;
    let mut penalty = 0.0;
    for (g, &w) in grad_w.iter_mut().zip(weights) {
        *g = *g / n + l2_lambda * w;
        penalty += w * w;
    }
    loss += 0.5 * l2_lambda * penalty;
    (loss, grad_w, grad_b)
}

pub fn train_logreg(features: &[SparseVector], labels: &[usize], config: &LogRegConfig) -> Result<LogRegModel> {
    check_two_classes(labels)?;
    if features.len() != labels.len() {
        return Err(Error::Data("features and labels differ in length".into()));
    }
    let dim = features.iter().map(SparseVector::dim).max().unwrap_or(0);
    let mut weights = vec![0.0; dim];
    let mut bias = 0.0;
    let mut loss_trace = Vec::with_capacity(config.epochs + 1);
    for _ in 0..config.epochs {
        let (loss, grad_w, grad_b) = objective(features, labels, &weights, bias, config.l2_lambda);
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss(format!("logistic regression loss {loss}")));
        }
        loss_trace.push(loss);
        for (w, g) in weights.iter_mut().zip(&grad_w) {
            *w -= config.lr * g;
        }
        bias -= config.lr * grad_b;
    }
    let (final_loss, _, _) = objective(features, labels, &weights, bias, config.l2_lambda);
    loss_trace.push(final_loss);
    Ok(LogRegModel { weights, bias, l2_lambda: config.l2_lambda, loss_trace })
}

impl LogRegModel {
    pub fn decision(&self, x: &SparseVector) -> f64 {
        x.iter()
            .filter(|(i, _)| (*i as usize) < self.weights.len())
            .map(|(i, v)| v * self.weights[i as usize])
            .sum::<f64>()
            + self.bias
    }
}

impl FeatureClassifier for LogRegModel {
    fn predict_proba(&self, x: &SparseVector) -> Probabilities {
        Probabilities::from_second(sigmoid(self.decision(x)))
    }
}
