use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::graph::{Graph, Var};
use super::optim::{adamw_step, AdamWConfig, OptimizerState};
use super::params::GradStore;
use super::SequenceModel;
use crate::baselines::check_two_classes;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    /// Non-improving validation epochs tolerated before stopping.
    pub patience: usize,
    #[serde(skip)]
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 10, batch_size: 16, lr: 1e-3, weight_decay: 0.01, patience: 2, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) || !(self.weight_decay >= 0.0) {
            return Err(Error::Config("lr must be positive and weight_decay non-negative".into()));
        }
        Ok(())
    }
}

/// A token id sequence (no padding needed) with its class index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub ids: Vec<u32>,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainTrace {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// Zero-based epoch whose weights were kept.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Train,
    Validate,
}

/// Cross-entropy training with AdamW and early stopping on validation loss;
/// the best-validation weights are left in `model`.
pub fn train_classifier<M: SequenceModel>(
    model: &mut M,
    train: &[Example],
    val: &[Example],
    config: &TrainConfig,
) -> Result<TrainTrace> {
    let labels: Vec<usize> = train.iter().map(|e| e.label).collect();
    check_two_classes(&labels)?;
    fit(model, train, val, config, |g, logits, phase, i| {
        let label = match phase {
            Phase::Train => train[i].label,
            Phase::Validate => val[i].label,
        };
        g.cross_entropy(logits, &[label])
    })
}

/// Generic loop: `loss` maps the logits of example `i` of the given phase to
/// a scalar.
pub(crate) fn fit<M, F>(
    model: &mut M,
    train: &[Example],
    val: &[Example],
    config: &TrainConfig,
    loss: F,
) -> Result<TrainTrace>
where
    M: SequenceModel,
    F: Fn(&mut Graph, Var, Phase, usize) -> Var + Sync,
{
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Data("empty training set".into()));
    }
    let mut state = OptimizerState::new(AdamWConfig::new(config.lr, config.weight_decay), model.params());
    let mut grads = GradStore::zeros_like(model.params());
    let mut trace = TrainTrace::default();
    let mut best_val = f64::INFINITY;
    let mut best = model.params().clone();
    let mut wait = 0;
    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut seed::derived_rng(config.seed, "epoch-order", epoch as u64));
        let mut dropout_rng = seed::derived_rng(config.seed, "dropout", epoch as u64);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            grads.zero();
            for &i in batch {
                let mut g = Graph::new(model.params());
                let logits = model.logits(&mut g, &train[i].ids, Some(&mut dropout_rng))?;
                let l = loss(&mut g, logits, Phase::Train, i);
                let value = g.scalar(l);
                if !value.is_finite() {
                    return Err(Error::NonFiniteLoss(format!("epoch {}, example {i}", epoch + 1)));
                }
                total += value;
                g.backward(l, &mut grads);
            }
            grads.scale(1.0 / batch.len() as f64);
            adamw_step(&mut state, model.params_mut(), &grads)?;
        }
        trace.train_loss.push(total / train.len() as f64);
        if val.is_empty() {
            best = model.params().clone();
            trace.best_epoch = epoch;
            continue;
        }
        let vl = mean_loss(model, val, &loss)?;
        trace.val_loss.push(vl);
        if vl < best_val {
            best_val = vl;
            best = model.params().clone();
            trace.best_epoch = epoch;
            wait = 0;
        } else {
            wait += 1;
            if wait > config.patience {
                trace.stopped_early = true;
                break;
            }
        }
    }
    *model.params_mut() = best;
    Ok(trace)
}

fn mean_loss<M, F>(model: &M, examples: &[Example], loss: &F) -> Result<f64>
where
    M: SequenceModel,
    F: Fn(&mut Graph, Var, Phase, usize) -> Var + Sync,
{
    let losses: Vec<f64> = examples
        .par_iter()
        .enumerate()
        .map(|(i, ex)| {
            let mut g = Graph::new(model.params());
            let logits = model.logits(&mut g, &ex.ids, None)?;
            let l = loss(&mut g, logits, Phase::Validate, i);
            Ok(g.scalar(l))
        })
        .collect::<Result<_>>()?;
    let mean = losses.iter().sum::<f64>() / losses.len() as f64;
    if !mean.is_finite() {
        return Err(Error::NonFiniteLoss("validation loss".into()));
    }
    Ok(mean)
}
