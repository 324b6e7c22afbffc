//! Masked-token and next-sentence pretraining.

use std::ops::Range;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::graph::Graph;
use super::optim::{adamw_step, AdamWConfig, OptimizerState};
use super::params::GradStore;
use super::transformer::TransformerClassifier;
use super::SequenceModel;
use crate::error::{Error, Result};
use crate::features::{ID_OFFSET, PAD_ID};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlmObjective {
    pub mask_rate: f64,
    /// Share of selected positions replaced by the mask id.
    pub mask_prob: f64,
    /// Share left unchanged.
    pub keep_prob: f64,
    /// Share replaced by a random vocabulary id.
    pub random_prob: f64,
}

impl Default for MlmObjective {
    fn default() -> Self {
        MlmObjective { mask_rate: 0.15, mask_prob: 0.8, keep_prob: 0.1, random_prob: 0.1 }
    }
}

impl MlmObjective {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.mask_rate) {
            return Err(Error::Config(format!("mask_rate must lie in [0, 1], got {}", self.mask_rate)));
        }
        let parts = [self.mask_prob, self.keep_prob, self.random_prob];
        if parts.iter().any(|&p| !(0.0..=1.0).contains(&p)) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config("mask/keep/random proportions must be non-negative and sum to 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NspObjective {
    /// Seed for pair construction.
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct PretrainObjective {
    pub mlm: MlmObjective,
    pub nsp: Option<NspObjective>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PretrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    #[serde(skip)]
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig { steps: 50, batch_size: 8, lr: 5e-3, weight_decay: 0.01, seed: 0 }
    }
}

/// Masked inputs with `(position, original id)` targets per sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlmBatch {
    pub inputs: Vec<Vec<u32>>,
    pub targets: Vec<Vec<(usize, u32)>>,
}

impl MlmBatch {
    pub fn target_count(&self) -> usize {
        self.targets.iter().map(Vec::len).sum()
    }
}

/// Selects each non-pad position with probability `mask_rate`, then masks,
/// keeps or randomizes it (ids drawn uniformly from `random_ids`).
pub fn build_mlm_batch(
    sequences: &[Vec<u32>],
    objective: &MlmObjective,
    mask_id: u32,
    random_ids: Range<u32>,
    seed: u64,
) -> Result<MlmBatch> {
    objective.validate()?;
    let mut rng = seed::rng(seed);
    let mut inputs = Vec::with_capacity(sequences.len());
    let mut targets = Vec::with_capacity(sequences.len());
    for seq in sequences {
        let mut input = seq.clone();
        let mut t = Vec::new();
        for (pos, &id) in seq.iter().enumerate() {
            if id == PAD_ID || rng.gen::<f64>() >= objective.mask_rate {
                continue;
            }
            t.push((pos, id));
            let r: f64 = rng.gen();
            if r < objective.mask_prob {
                input[pos] = mask_id;
            } else if r >= objective.mask_prob + objective.keep_prob && !random_ids.is_empty() {
                input[pos] = rng.gen_range(random_ids.clone());
            }
        }
        inputs.push(input);
        targets.push(t);
    }
    Ok(MlmBatch { inputs, targets })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NspPair {
    pub first: Vec<u32>,
    pub second: Vec<u32>,
    pub is_next: bool,
    pub first_doc: usize,
    pub second_doc: usize,
}

/// `n_pairs / 2` true successor pairs and the rest negatives whose second
/// sentence comes from a different document, shuffled. `documents` holds
/// the non-empty sentences of each document.
pub fn build_nsp_pairs(documents: &[Vec<Vec<u32>>], n_pairs: usize, seed: u64) -> Result<Vec<NspPair>> {
    let multi: Vec<usize> = (0..documents.len()).filter(|&d| documents[d].len() >= 2).collect();
    if multi.is_empty() {
        return Err(Error::Data("next-sentence pairs need a document with at least two sentences".into()));
    }
    let nonempty: Vec<usize> = (0..documents.len()).filter(|&d| !documents[d].is_empty()).collect();
    let positives = n_pairs / 2;
    let negatives = n_pairs - positives;
    if negatives > 0 && nonempty.len() < 2 {
        return Err(Error::Data("negative next-sentence pairs need at least two documents".into()));
    }
    let mut rng = seed::rng(seed);
    let mut pairs = Vec::with_capacity(n_pairs);
    for _ in 0..positives {
        let d = multi[rng.gen_range(0..multi.len())];
        let s = rng.gen_range(0..documents[d].len() - 1);
        pairs.push(NspPair {
            first: documents[d][s].clone(),
            second: documents[d][s + 1].clone(),
            is_next: true,
            first_doc: d,
            second_doc: d,
        });
    }
    for _ in 0..negatives {
        let a = nonempty[rng.gen_range(0..nonempty.len())];
        let mut b = nonempty[rng.gen_range(0..nonempty.len() - 1)];
        if b >= a {
            // skip over `a` so every other document is equally likely
            b = nonempty[nonempty.iter().position(|&x| x == b).unwrap() + 1];
        }
        let sa = rng.gen_range(0..documents[a].len());
        let sb = rng.gen_range(0..documents[b].len());
        pairs.push(NspPair {
            first: documents[a][sa].clone(),
            second: documents[b][sb].clone(),
            is_next: false,
            first_doc: a,
            second_doc: b,
        });
    }
    pairs.shuffle(&mut rng);
    Ok(pairs)
}

/// `first [SEP] second`, each side truncated so the whole fits `max_len`.
pub fn pack_pair(first: &[u32], second: &[u32], sep: u32, max_len: usize) -> Vec<u32> {
    let room = max_len.saturating_sub(1);
    let a = first.len().min(room.div_ceil(2).max(room.saturating_sub(second.len())));
    let b = second.len().min(room - a);
    let mut out = Vec::with_capacity(a + b + 1);
    out.extend_from_slice(&first[..a]);
    out.push(sep);
    out.extend_from_slice(&second[..b]);
    out
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PretrainTrace {
    pub mlm_loss: Vec<f64>,
    pub nsp_loss: Vec<f64>,
}

/// Mean masked-token cross-entropy over all targets of `batch`, without
/// dropout.
pub fn mlm_loss(model: &TransformerClassifier, batch: &MlmBatch) -> Result<f64> {
    let total = batch.target_count();
    if total == 0 {
        return Err(Error::NoTargets("the batch selected no positions".into()));
    }
    let mut sum = 0.0;
    for (input, targets) in batch.inputs.iter().zip(&batch.targets).filter(|(_, t)| !t.is_empty()) {
        let mut g = Graph::new(model.params());
        let (hidden, _) = model.encode(&mut g, input, None, None)?;
        let positions: Vec<usize> = targets.iter().map(|t| t.0).collect();
        let ids: Vec<usize> = targets.iter().map(|t| t.1 as usize).collect();
        let logits = model.mlm_logits(&mut g, hidden, &positions)?;
        let ce = g.cross_entropy(logits, &ids);
        sum += g.scalar(ce) * targets.len() as f64;
    }
    Ok(sum / total as f64)
}

/// Pretrains `model` on documents given as sentences of token ids. Each
/// step draws `batch_size` documents for the masked-token loss and, when
/// enabled, `batch_size` sentence pairs for the next-sentence loss; their
/// sum is minimized with AdamW.
pub fn pretrain(
    model: &mut TransformerClassifier,
    documents: &[Vec<Vec<u32>>],
    objective: &PretrainObjective,
    config: &PretrainConfig,
) -> Result<PretrainTrace> {
    objective.mlm.validate()?;
    if !model.has_pretraining_heads() {
        return Err(Error::Config("pretraining needs a model built with pretraining heads".into()));
    }
    if objective.mlm.mask_rate == 0.0 {
        return Err(Error::NoTargets("mask_rate is 0".into()));
    }
    if config.steps == 0 || config.batch_size == 0 {
        return Err(Error::Config("steps and batch_size must be positive".into()));
    }
    let max_len = model.max_len();
    let sequences: Vec<Vec<u32>> = documents
        .iter()
        .map(|d| d.iter().flatten().copied().take(max_len).collect::<Vec<u32>>())
        .filter(|s| !s.is_empty())
        .collect();
    if sequences.is_empty() {
        return Err(Error::Data("pretraining corpus has no tokens".into()));
    }
    let random_ids = ID_OFFSET..model.mask_id();
    let mut state = OptimizerState::new(AdamWConfig::new(config.lr, config.weight_decay), model.params());
    let mut grads = GradStore::zeros_like(model.params());
    let mut trace = PretrainTrace::default();
    for step in 0..config.steps {
        let step_u = step as u64;
        let mut pick = seed::derived_rng(config.seed, "pretrain-batch", step_u);
        let chosen: Vec<Vec<u32>> =
            (0..config.batch_size).map(|_| sequences[pick.gen_range(0..sequences.len())].clone()).collect();
        let batch = build_mlm_batch(
            &chosen,
            &objective.mlm,
            model.mask_id(),
            random_ids.clone(),
            seed::derive(config.seed, "mlm", step_u),
        )?;
        let total = batch.target_count();
        if total == 0 {
            return Err(Error::NoTargets(format!("step {} selected no positions", step + 1)));
        }
        let mut dropout_rng = seed::derived_rng(config.seed, "pretrain-dropout", step_u);
        grads.zero();
        let mut mlm = 0.0;
        for (input, targets) in batch.inputs.iter().zip(&batch.targets).filter(|(_, t)| !t.is_empty()) {
            let mut g = Graph::new(model.params());
            let (hidden, _) = model.encode(&mut g, input, Some(&mut dropout_rng), None)?;
            let positions: Vec<usize> = targets.iter().map(|t| t.0).collect();
            let ids: Vec<usize> = targets.iter().map(|t| t.1 as usize).collect();
            let logits = model.mlm_logits(&mut g, hidden, &positions)?;
            let ce = g.cross_entropy(logits, &ids);
            let weighted = g.scale(ce, targets.len() as f64 / total as f64);
            mlm += g.scalar(weighted);
            g.backward(weighted, &mut grads);
        }
        if !mlm.is_finite() {
            return Err(Error::NonFiniteLoss(format!("masked-token loss at step {}", step + 1)));
        }
        trace.mlm_loss.push(mlm);
        if let Some(nsp) = objective.nsp {
            let pairs = build_nsp_pairs(documents, config.batch_size, seed::derive(nsp.seed, "nsp", step_u))?;
            let mut nsp_total = 0.0;
            for pair in &pairs {
                let ids = pack_pair(&pair.first, &pair.second, model.sep_id(), max_len);
                let mut g = Graph::new(model.params());
                let logits = model.nsp_logits(&mut g, &ids, Some(&mut dropout_rng))?;
                let ce = g.cross_entropy(logits, &[usize::from(pair.is_next)]);
                let weighted = g.scale(ce, 1.0 / pairs.len() as f64);
                nsp_total += g.scalar(weighted);
                g.backward(weighted, &mut grads);
            }
            if !nsp_total.is_finite() {
                return Err(Error::NonFiniteLoss(format!("next-sentence loss at step {}", step + 1)));
            }
            trace.nsp_loss.push(nsp_total);
        }
        adamw_step(&mut state, model.params_mut(), &grads)?;
    }
    Ok(trace)
}
