//! Classical baselines and the classifier contract shared by every model.

pub mod forest;
pub mod logreg;
pub mod naive_bayes;

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Label, LabelSpace};
use crate::features::SparseVector;

pub use forest::{train_forest, ForestConfig, RandomForestModel};
pub use logreg::{train_logreg, LogRegConfig, LogRegModel};
pub use naive_bayes::{train_nb, NaiveBayesModel};

/// A probability pair indexed in the label space's canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probabilities(pub [f64; 2]);

impl Probabilities {
    pub fn uniform() -> Self {
        Probabilities([0.5, 0.5])
    }

    /// From the probability of canonical class 1.
    pub fn from_second(p: f64) -> Self {
        Probabilities([1.0 - p, p])
    }

    /// Normalizes two log scores with log-sum-exp.
    pub fn from_log_scores(scores: [f64; 2]) -> Self {
        let max = scores[0].max(scores[1]);
        if max == f64::NEG_INFINITY {
            return Probabilities::uniform();
        }
        let e0 = (scores[0] - max).exp();
        let e1 = (scores[1] - max).exp();
        let z = e0 + e1;
        Probabilities([e0 / z, e1 / z])
    }

    pub fn get(&self, space: &LabelSpace, label: Label) -> f64 {
        space.index(label).map_or(0.0, |i| self.0[i])
    }

    /// Argmax; an exact tie goes to the negative class.
    pub fn argmax(&self, space: &LabelSpace) -> Label {
        let [a, b] = space.labels();
        match self.0[0].partial_cmp(&self.0[1]) {
            Some(std::cmp::Ordering::Greater) => a,
            Some(std::cmp::Ordering::Less) => b,
            _ => space.negative(),
        }
    }
}

/// Anything that scores a document over a binary label space.
pub trait TextClassifier: Send + Sync {
    fn label_space(&self) -> LabelSpace;

    fn predict_proba(&self, document: &Document) -> Probabilities;

    fn predict(&self, document: &Document) -> Label {
        self.predict_proba(document).argmax(&self.label_space())
    }
}

impl<T: TextClassifier + ?Sized> TextClassifier for Box<T> {
    fn label_space(&self) -> LabelSpace {
        (**self).label_space()
    }

    fn predict_proba(&self, document: &Document) -> Probabilities {
        (**self).predict_proba(document)
    }
}

impl<T: TextClassifier + ?Sized> TextClassifier for &T {
    fn label_space(&self) -> LabelSpace {
        (**self).label_space()
    }

    fn predict_proba(&self, document: &Document) -> Probabilities {
        (**self).predict_proba(document)
    }
}

/// A learner over sparse feature vectors with class indices 0 and 1.
pub trait FeatureClassifier: Send + Sync {
    fn predict_proba(&self, x: &SparseVector) -> Probabilities;
}

pub(crate) fn check_two_classes(labels: &[usize]) -> Result<(), crate::Error> {
    let ones = labels.iter().filter(|&&l| l == 1).count();
    if labels.is_empty() {
        return Err(crate::Error::Data("empty training set".into()));
    }
    if ones == 0 || ones == labels.len() {
        let only = if ones == 0 { "class 0" } else { "class 1" };
        return Err(crate::Error::SingleClass(only.into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_ties_go_negative() {
        let space = LabelSpace::veracity();
        assert_eq!(Probabilities::uniform().argmax(&space), Label::Real);
        let real_positive = space.with_positive(Label::Real).unwrap();
        assert_eq!(Probabilities::uniform().argmax(&real_positive), Label::Fake);
        assert_eq!(Probabilities([0.7, 0.3]).argmax(&space), Label::Fake);
    }

    #[test]
    fn log_scores_normalize() {
        let p = Probabilities::from_log_scores([(1.0f64 / 12.0).ln(), (1.0f64 / 36.0).ln()]);
        assert!((p.0[0] - 0.75).abs() < 1e-12);
        assert!((p.0[0] + p.0[1] - 1.0).abs() < 1e-12);
        let p = Probabilities::from_log_scores([f64::NEG_INFINITY, -3.0]);
        assert_eq!(p.0, [0.0, 1.0]);
    }
}
