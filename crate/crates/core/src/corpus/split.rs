use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::LabeledCorpus;
use crate::error::{Error, Result};
use crate::seed;

/// Train/validation/test fractions plus the shuffling seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { train_fraction: 0.8, val_fraction: 0.1, test_fraction: 0.1, seed: 42, stratified: true }
    }
}

impl SplitSpec {
    pub fn with_seed(seed: u64) -> Self {
        SplitSpec { seed, ..SplitSpec::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let fractions = [
            ("train_fraction", self.train_fraction),
            ("val_fraction", self.val_fraction),
            ("test_fraction", self.test_fraction),
        ];
        for (name, f) in fractions {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1), got {f}")));
            }
        }
        let sum = self.train_fraction + self.val_fraction + self.test_fraction;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split fractions must sum to 1, got {sum}")));
        }
        Ok(())
    }

    /// Part sizes for `n` documents: floor for train and validation, the
    /// remainder for test.
    pub fn sizes(&self, n: usize) -> [usize; 3] {
        let floor = |f: f64| ((f * n as f64) + 1e-9).floor() as usize;
        let train = floor(self.train_fraction).min(n);
        let val = floor(self.val_fraction).min(n - train);
        [train, val, n - train - val]
    }
}

/// Splits each label's documents across the parts by largest remainder, so
/// every part holds within one document of its proportional share.
fn stratified_counts(label_total: usize, n: usize, sizes: [usize; 3]) -> [usize; 3] {
    let mut counts = [0usize; 3];
    let mut fractional = [(0.0f64, 0usize); 3];
    for p in 0..3 {
        let exact = label_total as f64 * sizes[p] as f64 / n as f64;
        counts[p] = (exact.floor() as usize).min(sizes[p]);
        fractional[p] = (exact - counts[p] as f64, p);
    }
    let assigned: usize = counts.iter().sum();
    let mut remaining = label_total.saturating_sub(assigned);
    fractional.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, p) in fractional.iter().cycle() {
        if remaining == 0 {
            break;
        }
        if counts[p] < sizes[p] {
            counts[p] += 1;
            remaining -= 1;
        }
    }
    counts
}

/// Partitions a corpus into train, validation and test parts. Each part
/// keeps the corpus order of its documents.
pub fn split(corpus: &LabeledCorpus, spec: &SplitSpec) -> Result<(LabeledCorpus, LabeledCorpus, LabeledCorpus)> {
    spec.validate()?;
    let n = corpus.len();
    if n < 3 {
        return Err(Error::Data(format!(
            "corpus `{}` has {n} documents; at least 3 are needed to split",
            corpus.name()
        )));
    }
    let sizes = spec.sizes(n);
    let mut rng = seed::derived_rng(spec.seed, "split", 0);
    let mut parts: [Vec<usize>; 3] = Default::default();

    if spec.stratified {
        let labels = corpus.label_indices();
        let mut by_label: [Vec<usize>; 2] = Default::default();
        for (i, &l) in labels.iter().enumerate() {
            by_label[l].push(i);
        }
        let first = stratified_counts(by_label[0].len(), n, sizes);
        let second = [sizes[0] - first[0], sizes[1] - first[1], sizes[2] - first[2]];
        for (members, counts) in by_label.iter_mut().zip([first, second]) {
            members.shuffle(&mut rng);
            let mut start = 0;
            for (part, &count) in parts.iter_mut().zip(counts.iter()) {
                part.extend_from_slice(&members[start..start + count]);
                start += count;
            }
        }
    } else {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut start = 0;
        for (part, &size) in parts.iter_mut().zip(sizes.iter()) {
            part.extend_from_slice(&order[start..start + size]);
            start += size;
        }
    }

    for part in parts.iter_mut() {
        part.sort_unstable();
    }
    let [train, val, test] = parts;
    Ok((corpus.from_indices(&train), corpus.from_indices(&val), corpus.from_indices(&test)))
}
