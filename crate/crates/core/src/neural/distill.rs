use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::graph::{softmax_matrix, Graph, Var};
use super::tensor::Matrix;
use super::train::{fit, Example, Phase, TrainConfig, TrainTrace};
use super::transformer::{TransformerClassifier, TransformerConfig};
use super::SequenceModel;
use crate::baselines::check_two_classes;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistillConfig {
    pub temperature: f64,
    /// Weight of the hard-label cross-entropy.
    pub alpha: f64,
}

impl Default for DistillConfig {
    fn default() -> Self {
        DistillConfig { temperature: 2.0, alpha: 0.5 }
    }
}

impl DistillConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::Config(format!("temperature must be positive, got {}", self.temperature)));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        Ok(())
    }
}

/// `α·CE(label) + (1−α)·T²·KL(teacher_T ‖ student_T)` for one example;
/// `teacher_probs` are the teacher's probabilities at temperature `T`.
/// A zero weight drops its term entirely.
pub fn distillation_loss(
    g: &mut Graph,
    student_logits: Var,
    label: usize,
    teacher_probs: &[f64; 2],
    config: &DistillConfig,
) -> Var {
    let DistillConfig { temperature: t, alpha } = *config;
    let hard = (alpha > 0.0).then(|| {
        let ce = g.cross_entropy(student_logits, &[label]);
        if alpha == 1.0 {
            ce
        } else {
            g.scale(ce, alpha)
        }
    });
    let soft = (alpha < 1.0).then(|| {
        let target = Matrix::from_vec(1, 2, teacher_probs.to_vec());
        let kl = g.soft_target_kl(student_logits, &target, t);
        g.scale(kl, (1.0 - alpha) * t * t)
    });
    match (hard, soft) {
        (Some(h), Some(s)) => g.add(h, s),
        (Some(h), None) => h,
        (None, Some(s)) => s,
        (None, None) => unreachable!("alpha is either positive or below one"),
    }
}

/// Teacher probabilities at temperature `t` for each example.
pub fn soft_targets<M: SequenceModel>(teacher: &M, examples: &[Example], t: f64) -> Result<Vec<[f64; 2]>> {
    examples
        .par_iter()
        .map(|ex| {
            let logits = teacher.predict_logits(&ex.ids)?;
            let p = softmax_matrix(&Matrix::from_vec(1, 2, logits.to_vec()), t);
            Ok([p.data[0], p.data[1]])
        })
        .collect()
}

/// Trains a fresh student of the given architecture against `teacher`.
pub fn distill<M: SequenceModel>(
    teacher: &M,
    student: TransformerConfig,
    vocab_size: usize,
    train: &[Example],
    val: &[Example],
    config: &DistillConfig,
    train_config: &TrainConfig,
) -> Result<(TransformerClassifier, TrainTrace)> {
    config.validate()?;
    let labels: Vec<usize> = train.iter().map(|e| e.label).collect();
    check_two_classes(&labels)?;
    let train_targets = soft_targets(teacher, train, config.temperature)?;
    let val_targets = soft_targets(teacher, val, config.temperature)?;
    let mut model = TransformerClassifier::new(student, vocab_size, train_config.seed)?;
    let trace = fit(&mut model, train, val, train_config, |g, logits, phase, i| match phase {
        Phase::Train => distillation_loss(g, logits, train[i].label, &train_targets[i], config),
        Phase::Validate => distillation_loss(g, logits, val[i].label, &val_targets[i], config),
    })?;
    Ok((model, trace))
}
