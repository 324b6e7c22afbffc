//! Multinomial naive Bayes with additive (Laplace) smoothing:
//! `P(t|c) = (count(t, c) + alpha) / (sum of counts in c + alpha * |V|)`.

use serde::{Deserialize, Serialize};

use super::{FeatureClassifier, Probabilities};
use crate::error::{Error, Result};
use crate::features::SparseVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesModel {
    pub log_prior: [f64; 2],
    pub log_likelihood: [Vec<f64>; 2],
    pub alpha: f64,
}

/// Fits on count vectors. A class absent from training gets prior zero.
pub fn train_nb(features: &[SparseVector], labels: &[usize], alpha: f64) -> Result<NaiveBayesModel> {
    if !(alpha > 0.0) {
        return Err(Error::Config(format!("naive Bayes alpha must be positive, got {alpha}")));
    }
    if features.is_empty() {
        return Err(Error::Data("empty training set".into()));
    }
    if features.len() != labels.len() {
        return Err(Error::Data("features and labels differ in length".into()));
    }
    let dim = features.iter().map(SparseVector::dim).max().unwrap_or(0);
    let mut counts = [vec![0.0; dim], vec![0.0; dim]];
    let mut docs = [0usize; 2];
    for (x, &y) in features.iter().zip(labels) {
        docs[y] += 1;
        for (i, v) in x.iter() {
            counts[y][i as usize] += v;
        }
    }
    let n = features.len() as f64;
    let log_prior = [(docs[0] as f64 / n).ln(), (docs[1] as f64 / n).ln()];
    let log_likelihood = counts.map(|c| {
        let total: f64 = c.iter().sum();
        let denom = (total + alpha * dim as f64).ln();
        c.iter().map(|&k| (k + alpha).ln() - denom).collect()
    });
    Ok(NaiveBayesModel { log_prior, log_likelihood, alpha })
}

impl NaiveBayesModel {
    pub fn log_scores(&self, x: &SparseVector) -> [f64; 2] {
        let mut scores = self.log_prior;
        for (c, score) in scores.iter_mut().enumerate() {
            if *score == f64::NEG_INFINITY {
                continue;
            }
            let ll = &self.log_likelihood[c];
            *score += x.iter().filter(|(i, _)| (*i as usize) < ll.len()).map(|(i, v)| v * ll[i as usize]).sum::<f64>();
        }
        scores
    }
}

impl FeatureClassifier for NaiveBayesModel {
    fn predict_proba(&self, x: &SparseVector) -> Probabilities {
        Probabilities::from_log_scores(self.log_scores(x))
    }
}
