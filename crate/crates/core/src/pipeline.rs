//! Two-step classification: an opinion filter removes opinion articles,
//! then a veracity classifier labels what remains as fake or real.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::TextClassifier;
use crate::corpus::{split, Document, Label, LabelKind, LabeledCorpus, SplitSpec};
use crate::error::{Error, Result};
use crate::model::{fit, FittedModel, ModelSpec};
use crate::seed;

pub const DEFAULT_TAU: f64 = 0.5;

/// A subjectivity classifier with an inclusive threshold on P(Opinion).
#[derive(Debug, Clone)]
pub struct OpinionFilter<C> {
    classifier: C,
    tau: f64,
}

pub fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("tau must lie in (0, 1), got {tau}")))
    }
}

impl<C: TextClassifier> OpinionFilter<C> {
    pub fn new(classifier: C, tau: f64) -> Result<Self> {
        check_tau(tau)?;
        let kind = classifier.label_space().kind();
        if kind != LabelKind::Subjectivity {
            return Err(Error::LabelSpaceMismatch {
                expected: LabelKind::Subjectivity.as_str().into(),
                found: kind.as_str().into(),
            });
        }
        Ok(OpinionFilter { classifier, tau })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn classifier(&self) -> &C {
        &self.classifier
    }

    pub fn opinion_probability(&self, document: &Document) -> f64 {
        let space = self.classifier.label_space();
        self.classifier.predict_proba(document).get(&space, Label::Opinion)
    }

    pub fn is_opinion(&self, document: &Document) -> bool {
        self.opinion_probability(document) >= self.tau
    }
}

/// Holdout figures for a trained filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub corpus: String,
    pub documents: usize,
    pub train_documents: usize,
    pub test_documents: usize,
    pub holdout_accuracy: f64,
}

/// Fits the filter on the train part of `factop` and records its accuracy
/// on the test part.
pub fn train_opinion_filter(
    factop: &LabeledCorpus,
    spec: &ModelSpec,
    tau: f64,
    split_spec: &SplitSpec,
    run_seed: u64,
) -> Result<(OpinionFilter<FittedModel>, FilterReport)> {
    check_tau(tau)?;
    if factop.label_space().kind() != LabelKind::Subjectivity {
        return Err(Error::LabelSpaceMismatch {
            expected: LabelKind::Subjectivity.as_str().into(),
            found: factop.label_space().kind().as_str().into(),
        });
    }
    factop.ensure_both_classes()?;
    let (train, val, test) = split(factop, split_spec)?;
    let fitted = fit(spec, &train, Some(&val), run_seed)?;
    let hits = test.documents().par_iter().zip(test.labels()).filter(|(d, y)| fitted.model.predict(d) == *y).count();
    let report = FilterReport {
        corpus: factop.name().to_string(),
        documents: factop.len(),
        train_documents: train.len(),
        test_documents: test.len(),
        holdout_accuracy: hits as f64 / test.len() as f64,
    };
    Ok((OpinionFilter::new(fitted.model, tau)?, report))
}

/// Drops every document the filter flags as opinion; order is preserved.
pub fn filter_corpus<C: TextClassifier>(corpus: &LabeledCorpus, filter: &OpinionFilter<C>) -> (LabeledCorpus, usize) {
    let flagged: Vec<bool> = corpus.documents().par_iter().map(|d| filter.is_opinion(d)).collect();
    let filtered = corpus.subset(|i, _| !flagged[i]);
    let removed = corpus.len() - filtered.len();
    (filtered, removed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tau: f64,
    pub filter_model: String,
    pub filter: Option<FilterReport>,
    pub train_documents: usize,
    pub train_removed: usize,
    pub val_documents: usize,
    pub val_removed: usize,
    /// Per-class counts of the filtered training corpus, label-space order.
    pub train_counts_after: [usize; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PipelineVerdict {
    /// Fact-flagged document with the veracity model's decision.
    Veracity { label: Label, confidence: f64 },
    /// Opinion-flagged document; confidence is P(Opinion).
    OpinionExcluded { confidence: f64 },
}

impl PipelineVerdict {
    pub fn label(&self) -> Option<Label> {
        match *self {
            PipelineVerdict::Veracity { label, .. } => Some(label),
            PipelineVerdict::OpinionExcluded { .. } => None,
        }
    }

    pub fn confidence(&self) -> f64 {
        match *self {
            PipelineVerdict::Veracity { confidence, .. } | PipelineVerdict::OpinionExcluded { confidence } => {
                confidence
            }
        }
    }

    pub fn is_excluded(&self) -> bool {
        matches!(self, PipelineVerdict::OpinionExcluded { .. })
    }
}

#[derive(Debug, Clone)]
pub struct TwoStepPipeline<F, V> {
    filter: OpinionFilter<F>,
    veracity: V,
    provenance: Provenance,
}

impl<F: TextClassifier, V: TextClassifier> TwoStepPipeline<F, V> {
    pub fn new(filter: OpinionFilter<F>, veracity: V, provenance: Provenance) -> Result<Self> {
        let kind = veracity.label_space().kind();
        if kind != LabelKind::Veracity {
            return Err(Error::LabelSpaceMismatch {
                expected: LabelKind::Veracity.as_str().into(),
                found: kind.as_str().into(),
            });
        }
        Ok(TwoStepPipeline { filter, veracity, provenance })
    }

    pub fn filter(&self) -> &OpinionFilter<F> {
        &self.filter
    }

    pub fn veracity(&self) -> &V {
        &self.veracity
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// The veracity model only runs on documents the filter passes.
    pub fn classify(&self, document: &Document) -> PipelineVerdict {
        let p_opinion = self.filter.opinion_probability(document);
        if p_opinion >= self.filter.tau {
            return PipelineVerdict::OpinionExcluded { confidence: p_opinion };
        }
        let space = self.veracity.label_space();
        let probs = self.veracity.predict_proba(document);
        let label = probs.argmax(&space);
        PipelineVerdict::Veracity { label, confidence: probs.get(&space, label) }
    }
}

fn missing_class(corpus: &LabeledCorpus) -> Option<Label> {
    let space = corpus.label_space();
    corpus.counts().iter().position(|&c| c == 0).map(|i| space.label_at(i))
}

/// Trains a veracity classifier on the filter-approved part of `train`
/// (and `val`, when given). The veracity model gets `run_seed` unchanged, so
/// a filter that flags nothing reproduces the one-step model.
pub fn train_veracity_stage<F: TextClassifier>(
    filter: OpinionFilter<F>,
    filter_model: &str,
    filter_report: Option<FilterReport>,
    train: &LabeledCorpus,
    val: Option<&LabeledCorpus>,
    spec: &ModelSpec,
    run_seed: u64,
) -> Result<(TwoStepPipeline<F, FittedModel>, Vec<String>)> {
    if train.label_space().kind() != LabelKind::Veracity {
        return Err(Error::LabelSpaceMismatch {
            expected: LabelKind::Veracity.as_str().into(),
            found: train.label_space().kind().as_str().into(),
        });
    }
    let (kept, train_removed) = filter_corpus(train, &filter);
    if let Some(label) = missing_class(&kept) {
        return Err(Error::ClassEliminated(label.to_string()));
    }
    let filtered_val = val.map(|v| filter_corpus(v, &filter));
    let fitted = fit(spec, &kept, filtered_val.as_ref().map(|(v, _)| v).filter(|v| !v.is_empty()), run_seed)?;
    let provenance = Provenance {
        tau: filter.tau(),
        filter_model: filter_model.to_string(),
        filter: filter_report,
        train_documents: train.len(),
        train_removed,
        val_documents: val.map_or(0, |v| v.len()),
        val_removed: filtered_val.as_ref().map_or(0, |(_, r)| *r),
        train_counts_after: kept.counts(),
    };
    let mut log =
        vec![format!("filter removed {train_removed} of {} training documents (tau {})", train.len(), filter.tau())];
    log.extend(fitted.log);
    Ok((TwoStepPipeline::new(filter, fitted.model, provenance)?, log))
}

/// Trains the filter on `factop`, then the veracity model on the filtered
/// training data.
#[allow(clippy::too_many_arguments)]
pub fn train_two_step(
    train: &LabeledCorpus,
    val: Option<&LabeledCorpus>,
    factop: &LabeledCorpus,
    filter_spec: &ModelSpec,
    veracity_spec: &ModelSpec,
    tau: f64,
    filter_split: &SplitSpec,
    run_seed: u64,
) -> Result<(TwoStepPipeline<FittedModel, FittedModel>, Vec<String>)> {
    filter_spec.validate()?;
    veracity_spec.validate()?;
    let filter_seed = seed::derive(run_seed, "opinion-filter", 0);
    let (filter, report) = train_opinion_filter(factop, filter_spec, tau, filter_split, filter_seed)?;
    let kind = filter.classifier().kind().as_str().to_string();
    let mut log = vec![format!(
        "opinion filter ({kind}) holdout accuracy {:.6} on {} documents",
        report.holdout_accuracy, report.test_documents
    )];
    let (pipeline, rest) = train_veracity_stage(filter, &kind, Some(report), train, val, veracity_spec, run_seed)?;
    log.extend(rest);
    Ok((pipeline, log))
}

const MANIFEST_FORMAT: &str = "newsbench-pipeline";
const MANIFEST_VERSION: u32 = 1;

/// On-disk description of a pipeline; model paths are relative to the
/// manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineManifest {
    pub format: String,
    pub version: u32,
    pub tau: f64,
    pub filter_model: String,
    pub veracity_model: String,
    pub provenance: Provenance,
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("pipeline");
    path.with_file_name(format!("{stem}.{suffix}.json"))
}

impl TwoStepPipeline<FittedModel, FittedModel> {
    /// Writes the manifest at `path` and the two models next to it as
    /// `<stem>.filter.json` and `<stem>.veracity.json`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<PipelineManifest> {
        let path = path.as_ref();
        let filter_path = sibling(path, "filter");
        let veracity_path = sibling(path, "veracity");
        self.filter.classifier.save(&filter_path)?;
        self.veracity.save(&veracity_path)?;
        let name = |p: &Path| p.file_name().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let manifest = PipelineManifest {
            format: MANIFEST_FORMAT.into(),
            version: MANIFEST_VERSION,
            tau: self.filter.tau,
            filter_model: name(&filter_path),
            veracity_model: name(&veracity_path),
            provenance: self.provenance.clone(),
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))?;
        Ok(manifest)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest: PipelineManifest = serde_json::from_str(&text)?;
        if manifest.format != MANIFEST_FORMAT || manifest.version != MANIFEST_VERSION {
            return Err(Error::Data(format!(
                "{}: unsupported pipeline manifest {} v{}",
                path.display(),
                manifest.format,
                manifest.version
            )));
        }
        let dir = path.parent().unwrap_or(Path::new(""));
        let filter = FittedModel::load(dir.join(&manifest.filter_model))?;
        let veracity = FittedModel::load(dir.join(&manifest.veracity_model))?;
        TwoStepPipeline::new(OpinionFilter::new(filter, manifest.tau)?, veracity, manifest.provenance)
    }
}
