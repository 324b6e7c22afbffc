//! Synthetic two-class corpora with controllable class separation.
//!
//! Each label space has two fixed class word pools plus one pool shared by
//! every class. A token comes from its class pool with probability
//! `separation`, otherwise from the shared pool; within a pool, words follow
//! a Zipf (1/rank) distribution. At separation 1.0 the two classes share no
//! vocabulary. Word pools never change; the seed only drives sampling.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Document, LabelKind, LabelSpace, LabeledCorpus};
use crate::error::{Error, Result};
use crate::preprocess::StopwordList;
use crate::seed;

const POOL_SIZE: usize = 40;
const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";
const POOL_SEED: u64 = 0x5eed_0f_f00d;

/// Options for [`generate_synthetic`]-style corpora.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub n_per_class: usize,
    pub label_space: LabelSpace,
    pub seed: u64,
    pub separation: f64,
    /// Veracity corpora only: the share of documents written as opinion
    /// pieces. Opinion pieces carry subjectivity-opinion vocabulary and a
    /// coin-flip veracity label; the rest carry subjectivity-fact vocabulary.
    pub opinion_rate: f64,
}

impl SyntheticSpec {
    pub fn new(n_per_class: usize, label_space: LabelSpace, seed: u64, separation: f64) -> Self {
        SyntheticSpec { n_per_class, label_space, seed, separation, opinion_rate: 0.0 }
    }

    pub fn with_opinion_rate(mut self, rate: f64) -> Self {
        self.opinion_rate = rate;
        self
    }

    pub fn generate(&self) -> Result<LabeledCorpus> {
        if self.n_per_class == 0 {
            return Err(Error::Config("n_per_class must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.separation) {
            return Err(Error::Config(format!("separation must lie in [0, 1], got {}", self.separation)));
        }
        if !(0.0..=1.0).contains(&self.opinion_rate) {
            return Err(Error::Config(format!("opinion_rate must lie in [0, 1], got {}", self.opinion_rate)));
        }
        let pools = Pools::build();
        let kind = self.label_space.kind();
        let class_pools = [pools.class(kind, 0), pools.class(kind, 1)];
        let zipf = WeightedIndex::new((0..POOL_SIZE).map(|r| 1.0 / (r + 1) as f64)).expect("positive weights");
        let mut rng = seed::derived_rng(self.seed, "synthetic", 0);
        let labels = self.label_space.labels();
        let mixing = kind == LabelKind::Veracity && self.opinion_rate > 0.0;

        let mut docs = Vec::with_capacity(2 * self.n_per_class);
        for i in 0..self.n_per_class {
            for (class, &label) in labels.iter().enumerate() {
                let mut sampler = WordSampler {
                    own: class_pools[class],
                    shared: &pools.shared,
                    separation: self.separation,
                    zipf: &zipf,
                    marker: None,
                };
                let mut label = label;
                if mixing {
                    let opinion = rng.gen_bool(self.opinion_rate);
                    sampler.marker = Some(pools.class(LabelKind::Subjectivity, usize::from(opinion)));
                    if opinion && rng.gen_bool(0.5) {
                        label = labels[1 - class];
                    }
                }
                let title = sampler.sentence(&mut rng, 4);
                let n_sentences = rng.gen_range(3..=6);
                let text = (0..n_sentences)
                    .map(|_| {
                        let len = rng.gen_range(6..=10);
                        sampler.sentence(&mut rng, len)
                    })
                    .collect::<Vec<_>>()
                    .join(" ");
                docs.push(Document::from_title_text(
                    format!("synthetic-{}-{i}", labels[class]),
                    &title,
                    &text,
                    Some(label),
                    "synthetic",
                ));
            }
        }
        LabeledCorpus::new(format!("synthetic-{}", kind.as_str()), self.label_space, docs)
    }
}

/// Two-class synthetic corpus; see the module docs for the construction.
pub fn generate_synthetic(
    n_per_class: usize,
    label_space: LabelSpace,
    seed: u64,
    separation: f64,
) -> Result<LabeledCorpus> {
    SyntheticSpec::new(n_per_class, label_space, seed, separation).generate()
}

struct WordSampler<'a> {
    own: &'a [String],
    shared: &'a [String],
    separation: f64,
    zipf: &'a WeightedIndex<f64>,
    marker: Option<&'a [String]>,
}

impl WordSampler<'_> {
    fn word(&self, rng: &mut ChaCha8Rng) -> &str {
        if let Some(marker) = self.marker {
            if rng.gen_bool(0.3) {
                return &marker[self.zipf.sample(rng)];
            }
        }
        let pool = if rng.gen_bool(self.separation) { self.own } else { self.shared };
        &pool[self.zipf.sample(rng)]
    }

    /// A capitalized, period-terminated sentence.
    fn sentence(&self, rng: &mut ChaCha8Rng, len: usize) -> String {
        let words: Vec<&str> = (0..len).map(|_| self.word(rng)).collect();
        let mut s = words.join(" ");
        if let Some(first) = s.get_mut(0..1) {
            first.make_ascii_uppercase();
        }
        s.push('.');
        s
    }
}

struct Pools {
    /// veracity class 0, veracity class 1, subjectivity class 0, subjectivity class 1
    classes: [Vec<String>; 4],
    shared: Vec<String>,
}

impl Pools {
    fn build() -> Pools {
        let stopwords = StopwordList::english();
        let mut rng = seed::rng(POOL_SEED);
        let mut seen = std::collections::HashSet::new();
        let mut next_pool = || {
            let mut pool = Vec::with_capacity(POOL_SIZE);
            while pool.len() < POOL_SIZE {
                let syllables = rng.gen_range(2..=3);
                let word: String = (0..syllables)
                    .flat_map(|_| {
                        [
                            CONSONANTS[rng.gen_range(0..CONSONANTS.len())] as char,
                            VOWELS[rng.gen_range(0..VOWELS.len())] as char,
                        ]
                    })
                    .collect();
                if !stopwords.contains(&word) && seen.insert(word.clone()) {
                    pool.push(word);
                }
            }
            pool
        };
        let classes = [next_pool(), next_pool(), next_pool(), next_pool()];
        let shared = next_pool();
        Pools { classes, shared }
    }

    fn class(&self, kind: LabelKind, class: usize) -> &[String] {
        let offset = match kind {
            LabelKind::Veracity => 0,
            LabelKind::Subjectivity => 2,
        };
        &self.classes[offset + class]
    }
}
