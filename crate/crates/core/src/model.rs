//! End-to-end text classifiers: preprocessing, features and a learner bundled
//! behind [`TextClassifier`], plus their on-disk format.
//!
//! A model is saved as two files: `<name>.json` holds the format tag and
//! version, model kind, label space, preprocessing settings, a reference to
//! the vocabulary (file name, SHA-256, build settings) and the learner
//! parameters; `<name>.vocab.tsv` holds the vocabulary.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{
    train_forest, train_logreg, train_nb, FeatureClassifier, ForestConfig, LogRegConfig, LogRegModel, NaiveBayesModel,
    Probabilities, RandomForestModel, TextClassifier,
};
use crate::corpus::{Document, LabelSpace, LabeledCorpus};
use crate::error::{Error, Result};
use crate::features::{
    build_vocab, count_vector, encode_sequence, fit_tfidf, TfidfModel, VocabMeta, Vocabulary, OOV_ID,
};
use crate::neural::{
    distill, pretrain, train_classifier, DistillConfig, Example, LstmClassifier, LstmConfig, MlmObjective, NamedParam,
    NspObjective, PretrainConfig, PretrainObjective, SequenceModel, TrainConfig, TransformerClassifier,
    TransformerConfig,
};
use crate::preprocess::{preprocess_all, preprocess_text, split_sentences, PreprocessConfig, StopwordList};
use crate::seed;

pub const FORMAT: &str = "newsbench-model";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Logreg,
    NaiveBayes,
    Forest,
    Lstm,
    Transformer,
    Distilled,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Logreg => "logreg",
            ModelKind::NaiveBayes => "naive_bayes",
            ModelKind::Forest => "forest",
            ModelKind::Lstm => "lstm",
            ModelKind::Transformer => "transformer",
            ModelKind::Distilled => "distilled",
        }
    }

    fn is_neural(self) -> bool {
        matches!(self, ModelKind::Lstm | ModelKind::Transformer | ModelKind::Distilled)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NaiveBayesConfig {
    pub alpha: f64,
}

impl Default for NaiveBayesConfig {
    fn default() -> Self {
        NaiveBayesConfig { alpha: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct LstmSettings {
    pub network: LstmConfig,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PretrainSettings {
    pub mlm: MlmObjective,
    pub nsp: bool,
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
}

impl Default for PretrainSettings {
    fn default() -> Self {
        let c = PretrainConfig::default();
        PretrainSettings {
            mlm: MlmObjective::default(),
            nsp: false,
            steps: c.steps,
            batch_size: c.batch_size,
            lr: c.lr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct TransformerSettings {
    pub network: TransformerConfig,
    pub train: TrainConfig,
    /// Masked-token (and optionally next-sentence) pretraining on the
    /// training documents before fine-tuning.
    pub pretrain: Option<PretrainSettings>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistilledSettings {
    pub teacher: TransformerSettings,
    pub student: TransformerConfig,
    pub distill: DistillConfig,
    pub train: TrainConfig,
}

impl Default for DistilledSettings {
    fn default() -> Self {
        DistilledSettings {
            teacher: TransformerSettings::default(),
            student: TransformerConfig { layers: 1, ..TransformerConfig::default() },
            distill: DistillConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

/// Learner choice and hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Logreg(LogRegConfig),
    NaiveBayes(NaiveBayesConfig),
    Forest(ForestConfig),
    Lstm(LstmSettings),
    Transformer(TransformerSettings),
    Distilled(DistilledSettings),
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::Logreg(LogRegConfig::default())
    }
}

impl ModelConfig {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelConfig::Logreg(_) => ModelKind::Logreg,
            ModelConfig::NaiveBayes(_) => ModelKind::NaiveBayes,
            ModelConfig::Forest(_) => ModelKind::Forest,
            ModelConfig::Lstm(_) => ModelKind::Lstm,
            ModelConfig::Transformer(_) => ModelKind::Transformer,
            ModelConfig::Distilled(_) => ModelKind::Distilled,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureConfig {
    /// `None` means 50,000 for classical models and 20,000 for neural ones.
    pub max_vocab: Option<usize>,
    pub min_df: usize,
    /// Sequence length for neural models.
    pub max_len: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig { max_vocab: None, min_df: 2, max_len: 256 }
    }
}

impl FeatureConfig {
    pub fn vocab_size_for(&self, kind: ModelKind) -> usize {
        self.max_vocab.unwrap_or(if kind.is_neural() { 20_000 } else { 50_000 })
    }
}

/// Everything needed to fit a classifier apart from data and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSpec {
    pub model: ModelConfig,
    pub features: FeatureConfig,
    pub preprocess: PreprocessConfig,
}

impl ModelSpec {
    pub fn new(model: ModelConfig) -> Self {
        ModelSpec { model, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let f = &self.features;
        if f.min_df == 0 || f.max_len == 0 || f.max_vocab == Some(0) {
            return Err(Error::Config("min_df, max_len and max_vocab must be positive".into()));
        }
        let check_len = |network_len: usize| {
            if f.max_len > network_len {
                Err(Error::Config(format!(
                    "features.max_len ({}) exceeds the network's max_len ({network_len})",
                    f.max_len
                )))
            } else {
                Ok(())
            }
        };
        match &self.model {
            ModelConfig::Logreg(c) => {
                if !(c.lr > 0.0) || c.epochs == 0 || !(c.l2_lambda >= 0.0) {
                    return Err(Error::Config("logreg needs lr > 0, epochs >= 1 and l2_lambda >= 0".into()));
                }
            }
            ModelConfig::NaiveBayes(c) => {
                if !(c.alpha > 0.0) {
                    return Err(Error::Config("naive Bayes alpha must be positive".into()));
                }
            }
            ModelConfig::Forest(c) => {
                if c.trees == 0 {
                    return Err(Error::Config("forest needs at least one tree".into()));
                }
            }
            ModelConfig::Lstm(s) => {
                s.network.validate()?;
                s.train.validate()?;
                check_len(s.network.max_len)?;
            }
            ModelConfig::Transformer(s) => validate_transformer(s, &check_len)?,
            ModelConfig::Distilled(s) => {
                validate_transformer(&s.teacher, &check_len)?;
                s.student.validate()?;
                s.distill.validate()?;
                s.train.validate()?;
                check_len(s.student.max_len)?;
            }
        }
        Ok(())
    }
}

fn validate_transformer(s: &TransformerSettings, check_len: &dyn Fn(usize) -> Result<()>) -> Result<()> {
    s.network.validate()?;
    s.train.validate()?;
    check_len(s.network.max_len)?;
    if let Some(p) = &s.pretrain {
        p.mlm.validate()?;
        if p.steps == 0 || p.batch_size == 0 || !(p.lr > 0.0) {
            return Err(Error::Config("pretraining needs steps, batch_size and lr to be positive".into()));
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
enum Body {
    Logreg { tfidf: TfidfModel, model: LogRegModel },
    NaiveBayes { vocab: Vocabulary, model: NaiveBayesModel },
    Forest { tfidf: TfidfModel, model: RandomForestModel },
    Lstm { vocab: Vocabulary, max_len: usize, network: LstmClassifier },
    Transformer { vocab: Vocabulary, max_len: usize, network: TransformerClassifier },
}

/// A trained classifier over raw documents.
#[derive(Debug, Clone)]
pub struct FittedModel {
    kind: ModelKind,
    label_space: LabelSpace,
    preprocess: PreprocessConfig,
    stopwords: StopwordList,
    body: Body,
}

/// A fitted model with its deterministic training log.
#[derive(Debug, Clone)]
pub struct Fitted {
    pub model: FittedModel,
    pub log: Vec<String>,
}

/// Token ids for a sequence model: encoded, unpadded, and a lone unknown
/// token for an empty document.
pub fn sequence_ids(tokens: &[String], vocab: &Vocabulary, max_len: usize) -> Vec<u32> {
    let enc = encode_sequence(tokens, vocab, max_len);
    if enc.actual_len == 0 {
        return vec![OOV_ID];
    }
    enc.ids[..enc.actual_len].to_vec()
}

fn examples(tokens: &[Vec<String>], labels: &[usize], vocab: &Vocabulary, max_len: usize) -> Vec<Example> {
    tokens.iter().zip(labels).map(|(t, &label)| Example { ids: sequence_ids(t, vocab, max_len), label }).collect()
}

/// Each document as its non-empty sentences in token ids.
fn sentence_ids(
    corpus: &LabeledCorpus,
    spec: &ModelSpec,
    list: &StopwordList,
    vocab: &Vocabulary,
) -> Vec<Vec<Vec<u32>>> {
    corpus
        .documents()
        .iter()
        .map(|d| {
            split_sentences(&d.body)
                .into_iter()
                .filter_map(|s| {
                    let (tokens, _) = preprocess_text(s, &spec.preprocess, list);
                    let enc = encode_sequence(&tokens, vocab, spec.features.max_len);
                    (enc.actual_len > 0).then(|| enc.ids[..enc.actual_len].to_vec())
                })
                .collect()
        })
        .collect()
}

/// The vocabulary `fit` would build for `spec` on `corpus`.
pub fn fit_vocabulary(corpus: &LabeledCorpus, spec: &ModelSpec) -> Result<Vocabulary> {
    let tokens: Vec<Vec<String>> =
        preprocess_all(corpus.documents(), &spec.preprocess).into_iter().map(|d| d.tokens).collect();
    build_vocab(&tokens, spec.features.vocab_size_for(spec.model.kind()), spec.features.min_df)
}

/// Sequence-model inputs for every document of `corpus`.
pub fn sequence_examples(corpus: &LabeledCorpus, spec: &ModelSpec, vocab: &Vocabulary) -> Vec<Example> {
    let tokens: Vec<Vec<String>> =
        preprocess_all(corpus.documents(), &spec.preprocess).into_iter().map(|d| d.tokens).collect();
    examples(&tokens, &corpus.label_indices(), vocab, spec.features.max_len)
}

/// Each document as its non-empty sentences in token ids, the input shape
/// of pretraining.
pub fn sentence_sequences(corpus: &LabeledCorpus, spec: &ModelSpec, vocab: &Vocabulary) -> Vec<Vec<Vec<u32>>> {
    sentence_ids(corpus, spec, &spec.preprocess.stopwords(), vocab)
}

/// Fits `spec` on `train`; `val` drives early stopping for neural models.
pub fn fit(spec: &ModelSpec, train: &LabeledCorpus, val: Option<&LabeledCorpus>, run_seed: u64) -> Result<Fitted> {
    spec.validate()?;
    train.ensure_both_classes()?;
    let space = train.label_space();
    if let Some(v) = val {
        if v.label_space().kind() != space.kind() {
            return Err(Error::LabelSpaceMismatch {
                expected: space.kind().as_str().into(),
                found: v.label_space().kind().as_str().into(),
            });
        }
    }
    let kind = spec.model.kind();
    let list = spec.preprocess.stopwords();
    let tokens: Vec<Vec<String>> =
        preprocess_all(train.documents(), &spec.preprocess).into_iter().map(|d| d.tokens).collect();
    let labels = train.label_indices();
    let max_vocab = spec.features.vocab_size_for(kind);
    let vocab = build_vocab(&tokens, max_vocab, spec.features.min_df)?;
    let mut log = vec![
        format!("model {}", kind.as_str()),
        format!("train {} documents ({})", train.len(), train.name()),
        format!("vocabulary {} tokens (max {max_vocab}, min_df {})", vocab.len(), spec.features.min_df),
    ];
    let (val_tokens, val_labels) = match val {
        Some(v) => (
            preprocess_all(v.documents(), &spec.preprocess).into_iter().map(|d| d.tokens).collect::<Vec<_>>(),
            v.label_indices(),
        ),
        None => (Vec::new(), Vec::new()),
    };
    let max_len = spec.features.max_len;
    let body = match &spec.model {
        ModelConfig::Logreg(c) => {
            let tfidf = fit_tfidf(&tokens, vocab)?;
            let x: Vec<_> = tokens.iter().map(|t| tfidf.transform(t)).collect();
            let config = LogRegConfig { seed: seed::derive(run_seed, "logreg", 0), ..*c };
            let model = train_logreg(&x, &labels, &config)?;
            log.push(format!("final loss {:.6}", model.loss_trace.last().copied().unwrap_or(f64::NAN)));
            Body::Logreg { tfidf, model }
        }
        ModelConfig::NaiveBayes(c) => {
            let x: Vec<_> = tokens.iter().map(|t| count_vector(t, &vocab)).collect();
            let model = train_nb(&x, &labels, c.alpha)?;
            Body::NaiveBayes { vocab, model }
        }
        ModelConfig::Forest(c) => {
            let tfidf = fit_tfidf(&tokens, vocab)?;
            let x: Vec<_> = tokens.iter().map(|t| tfidf.transform(t)).collect();
            let config = ForestConfig { seed: seed::derive(run_seed, "forest", 0), ..*c };
            let model = train_forest(&x, &labels, &config)?;
            let depth = model.trees.iter().map(|t| t.depth()).max().unwrap_or(0);
            log.push(format!("trees {}, max depth {depth}", model.trees.len()));
            Body::Forest { tfidf, model }
        }
        ModelConfig::Lstm(s) => {
            let train_ex = examples(&tokens, &labels, &vocab, max_len);
            let val_ex = examples(&val_tokens, &val_labels, &vocab, max_len);
            let mut network = LstmClassifier::new(s.network.clone(), vocab.len(), seed::derive(run_seed, "lstm", 0))?;
            let train_cfg = TrainConfig { seed: seed::derive(run_seed, "lstm-train", 0), ..s.train.clone() };
            let trace = train_classifier(&mut network, &train_ex, &val_ex, &train_cfg)?;
            log.extend(trace_lines(&trace));
            Body::Lstm { vocab, max_len, network }
        }
        ModelConfig::Transformer(s) => {
            let network = fit_transformer(
                s,
                spec,
                train,
                &list,
                &vocab,
                &tokens,
                &labels,
                &val_tokens,
                &val_labels,
                run_seed,
                "transformer",
                &mut log,
            )?;
            Body::Transformer { vocab, max_len, network }
        }
        ModelConfig::Distilled(s) => {
            let teacher = fit_transformer(
                &s.teacher,
                spec,
                train,
                &list,
                &vocab,
                &tokens,
                &labels,
                &val_tokens,
                &val_labels,
                run_seed,
                "teacher",
                &mut log,
            )?;
            let train_ex = examples(&tokens, &labels, &vocab, max_len);
            let val_ex = examples(&val_tokens, &val_labels, &vocab, max_len);
            let train_cfg = TrainConfig { seed: seed::derive(run_seed, "student-train", 0), ..s.train.clone() };
            let (student, trace) =
                distill(&teacher, s.student.clone(), vocab.len(), &train_ex, &val_ex, &s.distill, &train_cfg)?;
            log.push(format!(
                "distilled: teacher {} parameters, student {} parameters",
                teacher.params().count(),
                student.params().count()
            ));
            log.extend(trace_lines(&trace).into_iter().map(|l| format!("student {l}")));
            Body::Transformer { vocab, max_len, network: student }
        }
    };
    let model = FittedModel { kind, label_space: space, preprocess: spec.preprocess, stopwords: list, body };
    Ok(Fitted { model, log })
}

#[allow(clippy::too_many_arguments)]
fn fit_transformer(
    s: &TransformerSettings,
    spec: &ModelSpec,
    train: &LabeledCorpus,
    list: &StopwordList,
    vocab: &Vocabulary,
    tokens: &[Vec<String>],
    labels: &[usize],
    val_tokens: &[Vec<String>],
    val_labels: &[usize],
    run_seed: u64,
    tag: &str,
    log: &mut Vec<String>,
) -> Result<TransformerClassifier> {
    let max_len = spec.features.max_len;
    let mut config = s.network.clone();
    config.pretraining_heads |= s.pretrain.is_some();
    let mut network = TransformerClassifier::new(config, vocab.len(), seed::derive(run_seed, tag, 0))?;
    if let Some(p) = &s.pretrain {
        let docs = sentence_ids(train, spec, list, vocab);
        let objective =
            PretrainObjective { mlm: p.mlm, nsp: p.nsp.then(|| NspObjective { seed: seed::derive(run_seed, tag, 2) }) };
        let config = PretrainConfig {
            steps: p.steps,
            batch_size: p.batch_size,
            lr: p.lr,
            weight_decay: s.train.weight_decay,
            seed: seed::derive(run_seed, tag, 1),
        };
        let trace = pretrain(&mut network, &docs, &objective, &config)?;
        let first = trace.mlm_loss.first().copied().unwrap_or(f64::NAN);
        let last = trace.mlm_loss.last().copied().unwrap_or(f64::NAN);
        log.push(format!("{tag} pretraining: {} steps, mlm loss {first:.6} -> {last:.6}", trace.mlm_loss.len()));
    }
    let train_ex = examples(tokens, labels, vocab, max_len);
    let val_ex = examples(val_tokens, val_labels, vocab, max_len);
    let train_cfg = TrainConfig { seed: seed::derive(run_seed, tag, 3), ..s.train.clone() };
    let trace = train_classifier(&mut network, &train_ex, &val_ex, &train_cfg)?;
    log.extend(trace_lines(&trace).into_iter().map(|l| format!("{tag} {l}")));
    Ok(network)
}

fn trace_lines(trace: &crate::neural::TrainTrace) -> Vec<String> {
    let mut lines: Vec<String> = trace
        .train_loss
        .iter()
        .enumerate()
        .map(|(e, l)| match trace.val_loss.get(e) {
            Some(v) => format!("epoch {} train loss {l:.6} val loss {v:.6}", e + 1),
            None => format!("epoch {} train loss {l:.6}", e + 1),
        })
        .collect();
    let final_loss = trace.train_loss.get(trace.best_epoch).copied().unwrap_or(f64::NAN);
    lines.push(format!(
        "kept epoch {}{}; final loss {final_loss:.6}",
        trace.best_epoch + 1,
        if trace.stopped_early { " (early stop)" } else { "" }
    ));
    lines
}

impl FittedModel {
    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn preprocess_config(&self) -> PreprocessConfig {
        self.preprocess
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        match &self.body {
            Body::Logreg { tfidf, .. } | Body::Forest { tfidf, .. } => tfidf.vocab(),
            Body::NaiveBayes { vocab, .. } | Body::Lstm { vocab, .. } | Body::Transformer { vocab, .. } => vocab,
        }
    }

    /// Scalar parameter count of a neural model.
    pub fn network_parameters(&self) -> Option<usize> {
        match &self.body {
            Body::Lstm { network, .. } => Some(network.params().count()),
            Body::Transformer { network, .. } => Some(network.params().count()),
            _ => None,
        }
    }

    /// Same model bound to a label space of the same kind with another
    /// positive class; predictions are unaffected.
    pub fn with_label_space(mut self, space: LabelSpace) -> Result<Self> {
        if space.kind() != self.label_space.kind() {
            return Err(Error::LabelSpaceMismatch {
                expected: self.label_space.kind().as_str().into(),
                found: space.kind().as_str().into(),
            });
        }
        self.label_space = space;
        Ok(self)
    }

    fn tokens(&self, document: &Document) -> Vec<String> {
        preprocess_text(&document.body, &self.preprocess, &self.stopwords).0
    }

    /// Model file plus the sibling vocabulary file.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let vocab_path = vocab_path_for(path);
        let vocab = self.vocabulary();
        vocab.write(&vocab_path)?;
        let file = ModelFile {
            format: FORMAT.into(),
            version: FORMAT_VERSION,
            kind: self.kind,
            label_space: self.label_space,
            preprocess: self.preprocess,
            vocab: VocabRef {
                file: vocab_path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
                sha256: vocab.hash(),
                size: vocab.len(),
                meta: vocab.meta(),
            },
            learner: match &self.body {
                Body::Logreg { model, .. } => Learner::Logreg { model: model.clone() },
                Body::NaiveBayes { model, .. } => Learner::NaiveBayes { model: model.clone() },
                Body::Forest { model, .. } => Learner::Forest { model: model.clone() },
                Body::Lstm { max_len, network, .. } => Learner::Lstm {
                    config: network.config().clone(),
                    max_len: *max_len,
                    params: network.params().to_named(),
                },
                Body::Transformer { max_len, network, .. } => Learner::Transformer {
                    config: network.config().clone(),
                    max_len: *max_len,
                    params: network.params().to_named(),
                },
            },
        };
        let mut text = serde_json::to_string_pretty(&file)?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: ModelFile = serde_json::from_str(&text)?;
        if file.format != FORMAT || file.version != FORMAT_VERSION {
            return Err(Error::Data(format!(
                "{}: unsupported model format {} v{}",
                path.display(),
                file.format,
                file.version
            )));
        }
        let label_space = LabelSpace::new(file.label_space.kind(), file.label_space.positive())?;
        let vocab_path = path.parent().unwrap_or(Path::new(".")).join(&file.vocab.file);
        let vocab = Vocabulary::read(&vocab_path, file.vocab.meta)?;
        if vocab.hash() != file.vocab.sha256 {
            return Err(Error::Data(format!("{}: vocabulary hash does not match the model", vocab_path.display())));
        }
        let size = vocab.len();
        let body = match file.learner {
            Learner::Logreg { model } => Body::Logreg { tfidf: TfidfModel::from_vocab(vocab), model },
            Learner::NaiveBayes { model } => Body::NaiveBayes { vocab, model },
            Learner::Forest { model } => Body::Forest { tfidf: TfidfModel::from_vocab(vocab), model },
            Learner::Lstm { config, max_len, params } => {
                Body::Lstm { vocab, max_len, network: LstmClassifier::from_named(config, size, &params)? }
            }
            Learner::Transformer { config, max_len, params } => {
                Body::Transformer { vocab, max_len, network: TransformerClassifier::from_named(config, size, &params)? }
            }
        };
        Ok(FittedModel {
            kind: file.kind,
            label_space,
            preprocess: file.preprocess,
            stopwords: file.preprocess.stopwords(),
            body,
        })
    }
}

/// `model.json` → `model.vocab.tsv`.
pub fn vocab_path_for(model_path: &Path) -> PathBuf {
    let stem = model_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "model".into());
    model_path.with_file_name(format!("{stem}.vocab.tsv"))
}

impl TextClassifier for FittedModel {
    fn label_space(&self) -> LabelSpace {
        self.label_space
    }

    fn predict_proba(&self, document: &Document) -> Probabilities {
        let tokens = self.tokens(document);
        match &self.body {
            Body::Logreg { tfidf, model } => model.predict_proba(&tfidf.transform(&tokens)),
            Body::NaiveBayes { vocab, model } => model.predict_proba(&count_vector(&tokens, vocab)),
            Body::Forest { tfidf, model } => model.predict_proba(&tfidf.transform(&tokens)),
            Body::Lstm { vocab, max_len, network } => neural_proba(network, &sequence_ids(&tokens, vocab, *max_len)),
            Body::Transformer { vocab, max_len, network } => {
                neural_proba(network, &sequence_ids(&tokens, vocab, *max_len))
            }
        }
    }
}

fn neural_proba<M: SequenceModel>(network: &M, ids: &[u32]) -> Probabilities {
    let logits = network.predict_logits(ids).expect("encoded sequences fit the network");
    Probabilities::from_log_scores(logits)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format: String,
    version: u32,
    kind: ModelKind,
    label_space: LabelSpace,
    preprocess: PreprocessConfig,
    vocab: VocabRef,
    learner: Learner,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VocabRef {
    file: String,
    sha256: String,
    size: usize,
    meta: VocabMeta,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Learner {
    Logreg { model: LogRegModel },
    NaiveBayes { model: NaiveBayesModel },
    Forest { model: RandomForestModel },
    Lstm { config: LstmConfig, max_len: usize, params: Vec<NamedParam> },
    Transformer { config: TransformerConfig, max_len: usize, params: Vec<NamedParam> },
}
