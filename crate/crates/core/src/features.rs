//! Vocabularies, sparse count / TF-IDF vectors and padded id sequences.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const PAD_ID: u32 = 0;
pub const OOV_ID: u32 = 1;
/// Offset of the first vocabulary token in sequence ids.
pub const ID_OFFSET: u32 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    df: Vec<usize>,
    n_docs: usize,
    max_size: usize,
    min_df: usize,
}

/// Builds a vocabulary ranked by document frequency (descending), then token
/// (ascending); keeps tokens with `df >= min_df`, at most `max_size` of them.
pub fn build_vocab<T: AsRef<[String]>>(corpus_tokens: &[T], max_size: usize, min_df: usize) -> Result<Vocabulary> {
    if max_size == 0 || min_df == 0 {
        return Err(Error::Config("max_size and min_df must be at least 1".into()));
    }
    if corpus_tokens.is_empty() {
        return Err(Error::Data("cannot build a vocabulary from an empty corpus".into()));
    }
    let mut df: HashMap<&str, usize> = HashMap::new();
    for doc in corpus_tokens {
        let distinct: HashSet<&str> = doc.as_ref().iter().map(String::as_str).collect();
        for t in distinct {
            *df.entry(t).or_default() += 1;
        }
    }
    let mut ranked: Vec<(&str, usize)> = df.into_iter().filter(|&(_, d)| d >= min_df).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(max_size);
    let entries = ranked.into_iter().map(|(t, d)| (t.to_string(), d)).collect();
    Ok(Vocabulary::from_entries(entries, corpus_tokens.len(), max_size, min_df))
}

impl Vocabulary {
    fn from_entries(entries: Vec<(String, usize)>, n_docs: usize, max_size: usize, min_df: usize) -> Self {
        let mut tokens = Vec::with_capacity(entries.len());
        let mut df = Vec::with_capacity(entries.len());
        let mut index = HashMap::with_capacity(entries.len());
        for (i, (t, d)) in entries.into_iter().enumerate() {
            index.insert(t.clone(), i as u32);
            tokens.push(t);
            df.push(d);
        }
        Vocabulary { tokens, index, df, n_docs, max_size, min_df }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: u32) -> &str {
        &self.tokens[index as usize]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn df(&self, index: u32) -> usize {
        self.df[index as usize]
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn meta(&self) -> VocabMeta {
        VocabMeta { n_docs: self.n_docs, max_size: self.max_size, min_df: self.min_df }
    }

    /// `token<TAB>index<TAB>df` per line, sorted by index.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (i, (t, d)) in self.tokens.iter().zip(&self.df).enumerate() {
            let _ = writeln!(out, "{t}\t{i}\t{d}");
        }
        out
    }

    pub fn from_tsv(text: &str, meta: VocabMeta) -> Result<Self> {
        let mut entries = Vec::new();
        for (line_no, line) in text.lines().enumerate() {
            let mut parts = line.split('\t');
            let (Some(token), Some(index), Some(df), None) = (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(Error::Data(format!("vocabulary line {}: expected 3 fields", line_no + 1)));
            };
            let index: usize =
                index.parse().map_err(|_| Error::Data(format!("vocabulary line {}: bad index", line_no + 1)))?;
            if index != entries.len() {
                return Err(Error::Data(format!("vocabulary line {}: index {index} out of sequence", line_no + 1)));
            }
            let df: usize = df.parse().map_err(|_| Error::Data(format!("vocabulary line {}: bad df", line_no + 1)))?;
            entries.push((token.to_string(), df));
        }
        Ok(Vocabulary::from_entries(entries, meta.n_docs, meta.max_size, meta.min_df))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>, meta: VocabMeta) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Vocabulary::from_tsv(&text, meta)
    }

    /// SHA-256 of the TSV serialization, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_tsv().as_bytes()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabMeta {
    pub n_docs: usize,
    pub max_size: usize,
    pub min_df: usize,
}

/// Sorted sparse vector. Indices strictly increase and no zero is stored.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVector {
    dim: usize,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseVector {
    pub fn zeros(dim: usize) -> Self {
        SparseVector { dim, indices: Vec::new(), values: Vec::new() }
    }

    /// Sums duplicate indices and drops zeros. Panics on an index >= `dim`.
    pub fn from_pairs(dim: usize, mut pairs: Vec<(u32, f64)>) -> Self {
        pairs.sort_unstable_by_key(|p| p.0);
        let mut indices: Vec<u32> = Vec::with_capacity(pairs.len());
        let mut values: Vec<f64> = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            assert!((i as usize) < dim, "index {i} out of range for dimension {dim}");
            if indices.last() == Some(&i) {
                *values.last_mut().expect("paired") += v;
            } else {
                indices.push(i);
                values.push(v);
            }
        }
        let mut out = SparseVector { dim, indices: Vec::new(), values: Vec::new() };
        for (i, v) in indices.into_iter().zip(values) {
            if v != 0.0 {
                out.indices.push(i);
                out.values.push(v);
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn get(&self, index: u32) -> f64 {
        match self.indices.binary_search(&index) {
            Ok(pos) => self.values[pos],
            Err(_) => 0.0,
        }
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.iter().map(|(i, v)| v * dense[i as usize]).sum()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn scale(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }
}

/// Raw term counts; out-of-vocabulary tokens are dropped.
pub fn count_vector<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary) -> SparseVector {
    let pairs = tokens.iter().filter_map(|t| vocab.get(t.as_ref()).map(|i| (i, 1.0))).collect();
    SparseVector::from_pairs(vocab.len(), pairs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TfidfModel {
    vocab: Vocabulary,
    idf: Vec<f64>,
    n_docs: usize,
}

/// Smoothed inverse document frequency: `ln((1 + n) / (1 + df)) + 1`.
pub fn smoothed_idf(n_docs: usize, df: usize) -> f64 {
    ((1.0 + n_docs as f64) / (1.0 + df as f64)).ln() + 1.0
}

/// Fits idf weights for `vocab` over `corpus_tokens`.
pub fn fit_tfidf<T: AsRef<[String]>>(corpus_tokens: &[T], vocab: Vocabulary) -> Result<TfidfModel> {
    if corpus_tokens.is_empty() {
        return Err(Error::Data("tf-idf needs at least one document".into()));
    }
    let mut df = vec![0usize; vocab.len()];
    for doc in corpus_tokens {
        let distinct: HashSet<u32> = doc.as_ref().iter().filter_map(|t| vocab.get(t)).collect();
        for i in distinct {
            df[i as usize] += 1;
        }
    }
    Ok(TfidfModel::from_df(vocab, &df, corpus_tokens.len()))
}

impl TfidfModel {
    pub fn from_df(vocab: Vocabulary, df: &[usize], n_docs: usize) -> Self {
        let idf = df.iter().map(|&d| smoothed_idf(n_docs, d)).collect();
        TfidfModel { vocab, idf, n_docs }
    }

    /// Rebuilds the model from a vocabulary whose stored df was computed on
    /// the fitting corpus.
    pub fn from_vocab(vocab: Vocabulary) -> Self {
        let df: Vec<usize> = (0..vocab.len() as u32).map(|i| vocab.df(i)).collect();
        let n = vocab.n_docs();
        TfidfModel::from_df(vocab, &df, n)
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    /// L2-normalized `count * idf`; empty input gives the zero vector.
    pub fn transform<S: AsRef<str>>(&self, tokens: &[S]) -> SparseVector {
        let mut v = count_vector(tokens, &self.vocab);
        for (value, &i) in v.values.iter_mut().zip(&v.indices) {
            *value *= self.idf[i as usize];
        }
        let norm = v.norm();
        if norm > 0.0 {
            v.scale(1.0 / norm);
        }
        v
    }
}

pub fn tfidf_transform<S: AsRef<str>>(tokens: &[S], model: &TfidfModel) -> SparseVector {
    model.transform(tokens)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceEncoding {
    pub ids: Vec<u32>,
    pub max_len: usize,
    pub actual_len: usize,
}

/// Maps tokens to `vocab index + 2` (0 pad, 1 out-of-vocabulary), truncates
/// to `max_len` and right-pads with 0.
pub fn encode_sequence<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary, max_len: usize) -> SequenceEncoding {
    assert!(max_len >= 1, "max_len must be at least 1");
    let mut ids: Vec<u32> =
        tokens.iter().take(max_len).map(|t| vocab.get(t.as_ref()).map_or(OOV_ID, |i| i + ID_OFFSET)).collect();
    let actual_len = ids.len();
    ids.resize(max_len, PAD_ID);
    SequenceEncoding { ids, max_len, actual_len }
}
