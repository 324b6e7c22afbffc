//! Labelled news corpora: documents, label spaces, loaders, splits and
//! summary statistics.

mod load;
mod split;
mod stats;
mod synthetic;

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use load::{load_canonical, load_isot, write_canonical};
pub use split::{split, SplitSpec};
pub use stats::{stats, DatasetStats};
pub use synthetic::{generate_synthetic, SyntheticSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Fake,
    Real,
    Fact,
    Opinion,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Fake => "fake",
            Label::Real => "real",
            Label::Fact => "fact",
            Label::Opinion => "opinion",
        }
    }

    pub fn parse(s: &str) -> Option<Label> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fake" => Some(Label::Fake),
            "real" => Some(Label::Real),
            "fact" => Some(Label::Fact),
            "opinion" => Some(Label::Opinion),
            _ => None,
        }
    }

    pub fn kind(self) -> LabelKind {
        match self {
            Label::Fake | Label::Real => LabelKind::Veracity,
            Label::Fact | Label::Opinion => LabelKind::Subjectivity,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelKind {
    Veracity,
    Subjectivity,
}

impl LabelKind {
    /// Labels in canonical order. Probability vectors are indexed this way.
    pub fn labels(self) -> [Label; 2] {
        match self {
            LabelKind::Veracity => [Label::Fake, Label::Real],
            LabelKind::Subjectivity => [Label::Fact, Label::Opinion],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LabelKind::Veracity => "veracity",
            LabelKind::Subjectivity => "subjectivity",
        }
    }

    pub fn parse(s: &str) -> Option<LabelKind> {
        match s.trim().to_ascii_lowercase().as_str() {
            "veracity" => Some(LabelKind::Veracity),
            "subjectivity" => Some(LabelKind::Subjectivity),
            _ => None,
        }
    }
}

/// A binary label space with a designated positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabelSpace {
    kind: LabelKind,
    positive: Label,
}

impl LabelSpace {
    pub fn new(kind: LabelKind, positive: Label) -> Result<Self> {
        if positive.kind() != kind {
            return Err(Error::Config(format!("positive class `{positive}` is not a {} label", kind.as_str())));
        }
        Ok(LabelSpace { kind, positive })
    }

    /// Fake/Real with Fake as the positive class.
    pub fn veracity() -> Self {
        LabelSpace { kind: LabelKind::Veracity, positive: Label::Fake }
    }

    /// Fact/Opinion with Opinion as the positive class.
    pub fn subjectivity() -> Self {
        LabelSpace { kind: LabelKind::Subjectivity, positive: Label::Opinion }
    }

    pub fn kind(&self) -> LabelKind {
        self.kind
    }

    pub fn positive(&self) -> Label {
        self.positive
    }

    pub fn negative(&self) -> Label {
        self.other(self.positive)
    }

    pub fn labels(&self) -> [Label; 2] {
        self.kind.labels()
    }

    pub fn contains(&self, label: Label) -> bool {
        label.kind() == self.kind
    }

    pub fn index(&self, label: Label) -> Option<usize> {
        self.labels().iter().position(|&l| l == label)
    }

    pub fn label_at(&self, index: usize) -> Label {
        self.labels()[index]
    }

    pub fn other(&self, label: Label) -> Label {
        let [a, b] = self.labels();
        if label == a {
            b
        } else {
            a
        }
    }

    /// Parses a label string, rejecting labels from the other space.
    pub fn parse_label(&self, s: &str) -> Result<Label> {
        match Label::parse(s) {
            Some(label) if self.contains(label) => Ok(label),
            _ => Err(Error::UnknownLabel(s.to_string())),
        }
    }

    pub fn with_positive(self, positive: Label) -> Result<Self> {
        LabelSpace::new(self.kind, positive)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub title: String,
    pub body: String,
    pub label: Option<Label>,
    pub origin: String,
}

impl Document {
    /// Builds a document whose body is the title and text joined by a space.
    pub fn from_title_text(
        id: impl Into<String>,
        title: &str,
        text: &str,
        label: Option<Label>,
        origin: impl Into<String>,
    ) -> Self {
        let body = if title.trim().is_empty() { text.to_string() } else { format!("{title} {text}") };
        Document { id: id.into(), title: title.to_string(), body, label, origin: origin.into() }
    }

    /// An unlabelled document with no title, for inference.
    pub fn from_text(id: impl Into<String>, text: &str) -> Self {
        Document::from_title_text(id, "", text, None, "inline")
    }
}

/// An ordered, fully labelled collection bound to one label space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledCorpus {
    name: String,
    label_space: LabelSpace,
    documents: Vec<Document>,
    counts: [usize; 2],
    skipped_rows: usize,
}

impl LabeledCorpus {
    pub fn new(name: impl Into<String>, label_space: LabelSpace, documents: Vec<Document>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(documents.len());
        let mut counts = [0usize; 2];
        for doc in &documents {
            if !seen.insert(doc.id.as_str()) {
                return Err(Error::DuplicateId(doc.id.clone()));
            }
            let label = doc.label.ok_or_else(|| Error::Data(format!("document `{}` has no label", doc.id)))?;
            let idx = label_space.index(label).ok_or_else(|| Error::UnknownLabel(label.to_string()))?;
            counts[idx] += 1;
        }
        Ok(LabeledCorpus { name: name.into(), label_space, documents, counts, skipped_rows: 0 })
    }

    pub(crate) fn with_skipped_rows(mut self, skipped: usize) -> Self {
        self.skipped_rows = skipped;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn label_space(&self) -> LabelSpace {
        self.label_space
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// Per-label counts in canonical label order.
    pub fn counts(&self) -> [usize; 2] {
        self.counts
    }

    pub fn count(&self, label: Label) -> usize {
        self.label_space.index(label).map_or(0, |i| self.counts[i])
    }

    pub fn skipped_rows(&self) -> usize {
        self.skipped_rows
    }

    /// Label of each document, in order.
    pub fn labels(&self) -> Vec<Label> {
        self.documents.iter().map(|d| d.label.expect("labelled corpus")).collect()
    }

    /// Label index (canonical order) of each document.
    pub fn label_indices(&self) -> Vec<usize> {
        self.documents
            .iter()
            .map(|d| self.label_space.index(d.label.expect("labelled corpus")).expect("label in space"))
            .collect()
    }

    /// A corpus with the same identity holding the documents selected by
    /// `keep`, order preserved.
    pub fn subset<F: FnMut(usize, &Document) -> bool>(&self, mut keep: F) -> LabeledCorpus {
        let documents: Vec<Document> =
            self.documents.iter().enumerate().filter(|(i, d)| keep(*i, d)).map(|(_, d)| d.clone()).collect();
        LabeledCorpus::new(self.name.clone(), self.label_space, documents).expect("subset of a valid corpus is valid")
    }

    pub(crate) fn from_indices(&self, indices: &[usize]) -> LabeledCorpus {
        let documents = indices.iter().map(|&i| self.documents[i].clone()).collect();
        LabeledCorpus::new(self.name.clone(), self.label_space, documents).expect("subset of a valid corpus is valid")
    }

    pub fn rename(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Re-binds the corpus to a label space of the same kind with a different
    /// positive class.
    pub fn with_positive(mut self, positive: Label) -> Result<Self> {
        self.label_space = self.label_space.with_positive(positive)?;
        Ok(self)
    }

    pub fn ensure_both_classes(&self) -> Result<()> {
        let labels = self.label_space.labels();
        for (i, &c) in self.counts.iter().enumerate() {
            if c == 0 {
                let present = labels[1 - i];
                return Err(Error::SingleClass(present.to_string()));
            }
        }
        Ok(())
    }
}
