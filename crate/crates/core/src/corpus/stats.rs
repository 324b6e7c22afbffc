use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{Label, LabeledCorpus};
use crate::preprocess::{clean_text, tokenize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub name: String,
    pub total: usize,
    pub per_label: Vec<(Label, usize)>,
    /// Whitespace-token length of the raw bodies.
    pub mean_tokens: f64,
    pub median_tokens: f64,
    /// Distinct tokens after cleaning, before stopword removal.
    pub vocabulary_estimate: usize,
    pub skipped_rows: usize,
}

impl DatasetStats {
    pub fn render(&self) -> String {
        let mut out = format!("dataset: {}\ntotal: {}\n", self.name, self.total);
        for (label, count) in &self.per_label {
            out.push_str(&format!("{label}: {count}\n"));
        }
        out.push_str(&format!(
            "mean_tokens: {:.2}\nmedian_tokens: {:.1}\nvocabulary_estimate: {}\nskipped_rows: {}\n",
            self.mean_tokens, self.median_tokens, self.vocabulary_estimate, self.skipped_rows
        ));
        out
    }
}

/// Summary counts, recomputed from the documents on every call.
pub fn stats(corpus: &LabeledCorpus) -> DatasetStats {
    let labels = corpus.label_space().labels();
    let mut per_label: Vec<(Label, usize)> = labels.iter().map(|&l| (l, 0)).collect();
    let mut lengths = Vec::with_capacity(corpus.len());
    let mut vocab: HashSet<String> = HashSet::new();
    for doc in corpus.documents() {
        if let Some(entry) = per_label.iter_mut().find(|(l, _)| Some(*l) == doc.label) {
            entry.1 += 1;
        }
        lengths.push(doc.body.split_whitespace().count());
        vocab.extend(tokenize(&clean_text(&doc.body)));
    }
    let total = corpus.len();
    let mean_tokens = if total == 0 { 0.0 } else { lengths.iter().sum::<usize>() as f64 / total as f64 };
    lengths.sort_unstable();
    let median_tokens = match total {
        0 => 0.0,
        n if n % 2 == 1 => lengths[n / 2] as f64,
        n => (lengths[n / 2 - 1] + lengths[n / 2]) as f64 / 2.0,
    };
    DatasetStats {
        name: corpus.name().to_string(),
        total,
        per_label,
        mean_tokens,
        median_tokens,
        vocabulary_estimate: vocab.len(),
        skipped_rows: corpus.skipped_rows(),
    }
}
