//! Random forest of Gini decision trees over sparse features.
//!
//! Each tree is grown on a bootstrap sample. At every node a random subset of
//! features is inspected; as in common implementations, inspection continues
//! past the subset size until at least one valid split is found or the
//! features run out. Splits send `value > threshold` right, with thresholds
//! at midpoints between consecutive distinct observed values.
//!
//! Tree `i` draws from the seed `derive(master, "tree", i)`, so the forest
//! does not depend on how trees are scheduled across threads.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_two_classes, FeatureClassifier, Probabilities};
use crate::error::{Error, Result};
use crate::features::SparseVector;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestConfig {
    pub trees: usize,
    /// Share of features inspected per node; `None` means `sqrt(|V|) / |V|`.
    pub feature_fraction: Option<f64>,
    /// `None` grows trees until leaves are pure.
    pub max_depth: Option<usize>,
    /// Derived from the run seed.
    #[serde(skip)]
    pub seed: u64,
    /// Class index a tied leaf votes for (the negative class).
    pub tie_class: usize,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig { trees: 100, feature_fraction: None, max_depth: Some(40), seed: 0, tie_class: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Leaf { class: usize, counts: [usize; 2] },
    Split { feature: u32, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn predict(&self, x: &SparseVector) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { class, .. } => return *class,
                Node::Split { feature, threshold, left, right } => {
                    at = if x.get(*feature) > *threshold { *right } else { *left };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForestModel {
    pub trees: Vec<DecisionTree>,
    pub config: ForestConfig,
    pub n_features: usize,
}

impl RandomForestModel {
    pub fn votes(&self, x: &SparseVector) -> [usize; 2] {
        let mut votes = [0usize; 2];
        for t in &self.trees {
            votes[t.predict(x)] += 1;
        }
        votes
    }
}

impl FeatureClassifier for RandomForestModel {
    fn predict_proba(&self, x: &SparseVector) -> Probabilities {
        let votes = self.votes(x);
        let n = self.trees.len() as f64;
        Probabilities([votes[0] as f64 / n, votes[1] as f64 / n])
    }
}

pub fn train_forest(features: &[SparseVector], labels: &[usize], config: &ForestConfig) -> Result<RandomForestModel> {
    if config.trees == 0 {
        return Err(Error::Config("forest needs at least one tree".into()));
    }
    if features.len() != labels.len() {
        return Err(Error::Data("features and labels differ in length".into()));
    }
    check_two_classes(labels)?;
    let n_features = features.iter().map(SparseVector::dim).max().unwrap_or(0);
    let fraction = config.feature_fraction.unwrap_or_else(|| (n_features as f64).sqrt() / (n_features.max(1) as f64));
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Config(format!("feature_fraction must lie in (0, 1], got {fraction}")));
    }
    let per_node = ((fraction * n_features as f64).round() as usize).max(1);
    let trees = (0..config.trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::derived_rng(config.seed, "tree", t as u64);
            let n = features.len();
            let sample: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            TreeBuilder {
                features,
                labels,
                n_features,
                per_node,
                max_depth: config.max_depth,
                tie_class: config.tie_class,
                rng,
                nodes: Vec::new(),
            }
            .build(sample)
        })
        .collect();
    Ok(RandomForestModel { trees, config: *config, n_features })
}

fn gini(counts: [usize; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let p = counts[0] as f64 / n;
    1.0 - p * p - (1.0 - p) * (1.0 - p)
}

struct BestSplit {
    feature: u32,
    threshold: f64,
    impurity: f64,
}

struct TreeBuilder<'a> {
    features: &'a [SparseVector],
    labels: &'a [usize],
    n_features: usize,
    per_node: usize,
    max_depth: Option<usize>,
    tie_class: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

impl TreeBuilder<'_> {
    fn build(mut self, sample: Vec<usize>) -> DecisionTree {
        // (node slot, members, depth)
        let mut stack = vec![(0usize, sample, 0usize)];
        self.nodes.push(Node::Leaf { class: self.tie_class, counts: [0, 0] });
        while let Some((slot, members, depth)) = stack.pop() {
            let counts = self.counts(&members);
            let leaf = self.leaf(counts);
            let pure = counts[0] == 0 || counts[1] == 0;
            let depth_reached = self.max_depth.is_some_and(|d| depth >= d);
            if pure || depth_reached || members.len() < 2 {
                self.nodes[slot] = leaf;
                continue;
            }
            let Some(best) = self.best_split(&members) else {
                self.nodes[slot] = leaf;
                continue;
            };
            let (left, right): (Vec<usize>, Vec<usize>) =
                members.iter().partition(|&&i| self.features[i].get(best.feature) <= best.threshold);
            let left_slot = self.nodes.len();
            self.nodes.push(Node::Leaf { class: self.tie_class, counts: [0, 0] });
            let right_slot = self.nodes.len();
            self.nodes.push(Node::Leaf { class: self.tie_class, counts: [0, 0] });
            self.nodes[slot] =
                Node::Split { feature: best.feature, threshold: best.threshold, left: left_slot, right: right_slot };
            stack.push((right_slot, right, depth + 1));
            stack.push((left_slot, left, depth + 1));
        }
        DecisionTree { nodes: self.nodes }
    }

    fn counts(&self, members: &[usize]) -> [usize; 2] {
        let mut c = [0usize; 2];
        for &i in members {
            c[self.labels[i]] += 1;
        }
        c
    }

    fn leaf(&self, counts: [usize; 2]) -> Node {
        let class = match counts[0].cmp(&counts[1]) {
            std::cmp::Ordering::Greater => 0,
            std::cmp::Ordering::Less => 1,
            std::cmp::Ordering::Equal => self.tie_class,
        };
        Node::Leaf { class, counts }
    }

    fn best_split(&mut self, members: &[usize]) -> Option<BestSplit> {
        // Lazy Fisher-Yates over all feature indices.
        let mut swapped: HashMap<usize, usize> = HashMap::new();
        let mut best: Option<BestSplit> = None;
        let mut inspected = 0;
        let mut values: Vec<(f64, usize)> = Vec::with_capacity(members.len());
        for pos in 0..self.n_features {
            if inspected >= self.per_node && best.is_some() {
                break;
            }
            let j = self.rng.gen_range(pos..self.n_features);
            let fj = *swapped.get(&j).unwrap_or(&j);
            let fp = *swapped.get(&pos).unwrap_or(&pos);
            swapped.insert(j, fp);
            let feature = fj as u32;
            inspected += 1;

            values.clear();
            values.extend(members.iter().map(|&i| (self.features[i].get(feature), self.labels[i])));
            if let Some((threshold, impurity)) = best_threshold(&mut values) {
                if best.as_ref().is_none_or(|b| impurity < b.impurity) {
                    best = Some(BestSplit { feature, threshold, impurity });
                }
            }
        }
        best
    }
}

/// Lowest weighted child Gini over midpoint thresholds, or `None` if the
/// feature is constant on these values.
fn best_threshold(values: &mut [(f64, usize)]) -> Option<(f64, f64)> {
    let first = values.first()?.0;
    if values.iter().all(|v| v.0 == first) {
        return None;
    }
    values.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = values.len();
    let mut total = [0usize; 2];
    for v in values.iter() {
        total[v.1] += 1;
    }
    let mut left = [0usize; 2];
    let mut best: Option<(f64, f64)> = None;
    for k in 0..n - 1 {
        left[values[k].1] += 1;
        if values[k].0 == values[k + 1].0 {
            continue;
        }
        let right = [total[0] - left[0], total[1] - left[1]];
        let nl = (k + 1) as f64;
        let nr = (n - k - 1) as f64;
        let impurity = (nl * gini(left) + nr * gini(right)) / n as f64;
        if best.is_none_or(|b| impurity < b.1) {
            best = Some((0.5 * (values[k].0 + values[k + 1].0), impurity));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn separable(n: usize) -> (Vec<SparseVector>, Vec<usize>) {
        let xs = (0..n)
            .map(|i| {
                let class = i % 2;
                SparseVector::from_pairs(4, vec![(class as u32, 1.0 + (i as f64) * 0.01), (2, (i % 3) as f64)])
            })
            .collect();
        let ys = (0..n).map(|i| i % 2).collect();
        (xs, ys)
    }

    #[test]
    fn single_full_tree_fits_separable_data() {
        let (xs, ys) = separable(20);
        let config = ForestConfig { trees: 1, max_depth: None, seed: 5, ..Default::default() };
        let m = train_forest(&xs, &ys, &config).unwrap();
        for (x, &y) in xs.iter().zip(&ys) {
            assert_eq!(m.trees[0].predict(x), y);
        }
    }

    #[test]
    fn vote_fraction() {
        let leaf = |class| DecisionTree { nodes: vec![Node::Leaf { class, counts: [1, 1] }] };
        let m = RandomForestModel {
            trees: vec![leaf(0), leaf(0), leaf(0), leaf(1)],
            config: ForestConfig { trees: 4, ..Default::default() },
            n_features: 1,
        };
        assert_eq!(m.predict_proba(&SparseVector::zeros(1)).0, [0.75, 0.25]);
    }

    #[test]
    fn thread_count_does_not_matter() {
        let (xs, ys) = separable(60);
        let config = ForestConfig { trees: 12, seed: 77, feature_fraction: Some(0.5), ..Default::default() };
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| train_forest(&xs, &ys, &config).unwrap())
        };
        let one = run(1);
        let eight = run(8);
        assert_eq!(one, eight);
        let preds = |m: &RandomForestModel| xs.iter().map(|x| m.predict_proba(x).0).collect::<Vec<_>>();
        assert_eq!(preds(&one), preds(&eight));
    }

    #[test]
    fn depth_limit_respected() {
        let (xs, ys) = separable(40);
        let config = ForestConfig { trees: 3, max_depth: Some(1), ..Default::default() };
        let m = train_forest(&xs, &ys, &config).unwrap();
        assert!(m.trees.iter().all(|t| t.depth() <= 1));
    }

    #[test]
    fn threshold_midpoints() {
        let mut v = vec![(0.0, 0), (0.0, 0), (2.0, 1), (4.0, 1)];
        let (t, imp) = best_threshold(&mut v).unwrap();
        assert_eq!(t, 1.0);
        assert_eq!(imp, 0.0);
        assert!(best_threshold(&mut [(1.0, 0), (1.0, 1)]).is_none());
    }

    proptest! {
        #[test]
        fn probabilities_and_tree_order(seed in any::<u64>(), n in 6usize..40) {
            let mut rng = crate::seed::rng(seed);
            let xs: Vec<SparseVector> = (0..n).map(|_| {
                SparseVector::from_pairs(5, (0..3).map(|_| (rng.gen_range(0..5u32), rng.gen_range(0.0..1.0))).collect())
            }).collect();
            let mut ys: Vec<usize> = (0..n).map(|_| rng.gen_range(0..2)).collect();
            ys[0] = 0;
            ys[1] = 1;
            let config = ForestConfig { trees: 7, seed, ..Default::default() };
            let m = train_forest(&xs, &ys, &config).unwrap();
            let mut reversed = m.clone();
            reversed.trees.reverse();
            for x in &xs {
                let p = m.predict_proba(x);
                prop_assert!((p.0[0] + p.0[1] - 1.0).abs() < 1e-9);
                prop_assert_eq!(p, reversed.predict_proba(x));
            }
        }
    }
}
