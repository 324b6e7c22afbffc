//! Confusion matrices, per-class and macro metrics, evaluation reports and
//! one-step versus two-step comparisons.
//!
//! Ratio convention: precision, recall and F1 are 0.0 whenever their
//! denominator is 0.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::TextClassifier;
use crate::corpus::{Label, LabelSpace, LabeledCorpus};
use crate::error::{Error, Result};
use crate::pipeline::{PipelineVerdict, TwoStepPipeline};

pub const ZERO_DIVISION_NOTE: &str =
    "precision, recall and F1 are reported as 0.0 when their denominator is 0; accuracy is overall accuracy";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub positive: Label,
    pub negative: Label,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Count of documents with the given actual and predicted labels.
    pub fn cell(&self, actual: Label, predicted: Label) -> usize {
        match (actual == self.positive, predicted == self.positive) {
            (true, true) => self.tp,
            (true, false) => self.fn_,
            (false, true) => self.fp,
            (false, false) => self.tn,
        }
    }

    /// The same counts seen from the other class.
    pub fn swapped(&self) -> ConfusionMatrix {
        ConfusionMatrix {
            positive: self.negative,
            negative: self.positive,
            tp: self.tn,
            fp: self.fn_,
            fn_: self.fp,
            tn: self.tp,
        }
    }
}

pub fn confusion(predictions: &[Label], labels: &[Label], space: &LabelSpace) -> Result<ConfusionMatrix> {
    if predictions.len() != labels.len() {
        return Err(Error::Data(format!("{} predictions for {} labels", predictions.len(), labels.len())));
    }
    if labels.is_empty() {
        return Err(Error::Data("cannot score an empty prediction set".into()));
    }
    let positive = space.positive();
    let mut m = ConfusionMatrix { positive, negative: space.negative(), tp: 0, fp: 0, fn_: 0, tn: 0 };
    for (&p, &y) in predictions.iter().zip(labels) {
        for l in [p, y] {
            if !space.contains(l) {
                return Err(Error::UnknownLabel(l.to_string()));
            }
        }
        match (y == positive, p == positive) {
            (true, true) => m.tp += 1,
            (true, false) => m.fn_ += 1,
            (false, true) => m.fp += 1,
            (false, false) => m.tn += 1,
        }
    }
    Ok(m)
}

/// `n / d`, or 0.0 when `d` is 0.
pub fn ratio(n: f64, d: f64) -> f64 {
    if d == 0.0 {
        0.0
    } else {
        n / d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl ClassMetrics {
    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Accuracy => self.accuracy,
            Metric::Precision => self.precision,
            Metric::Recall => self.recall,
            Metric::F1 => self.f1,
        }
    }

    fn mean(a: &ClassMetrics, b: &ClassMetrics) -> ClassMetrics {
        ClassMetrics {
            accuracy: (a.accuracy + b.accuracy) / 2.0,
            precision: (a.precision + b.precision) / 2.0,
            recall: (a.recall + b.recall) / 2.0,
            f1: (a.f1 + b.f1) / 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Accuracy,
    Precision,
    Recall,
    F1,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Accuracy, Metric::Precision, Metric::Recall, Metric::F1];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::Precision => "precision",
            Metric::Recall => "recall",
            Metric::F1 => "f1",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Metric::Accuracy => "Accuracy",
            Metric::Precision => "Precision",
            Metric::Recall => "Recall",
            Metric::F1 => "F1 Score",
        }
    }
}

/// Per-class metrics in the order (positive, negative) and their macro mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub positive: ClassMetrics,
    pub negative: ClassMetrics,
    #[serde(rename = "macro")]
    pub macro_avg: ClassMetrics,
}

fn class_metrics(m: &ConfusionMatrix) -> ClassMetrics {
    let (tp, fp, fn_, tn) = (m.tp as f64, m.fp as f64, m.fn_ as f64, m.tn as f64);
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    ClassMetrics {
        accuracy: ratio(tp + tn, tp + fp + fn_ + tn),
        precision,
        recall,
        f1: ratio(2.0 * precision * recall, precision + recall),
    }
}

pub fn metrics(m: &ConfusionMatrix) -> Metrics {
    let positive = class_metrics(m);
    let negative = class_metrics(&m.swapped());
    Metrics { positive, negative, macro_avg: ClassMetrics::mean(&positive, &negative) }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    OneStep,
    TwoStep,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::OneStep => "one_step",
            Mode::TwoStep => "two_step",
        }
    }
}

/// How a two-step evaluation scores documents the filter flags as opinion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ExcludedScoring {
    /// Counted as a wrong prediction for the document's true label.
    #[default]
    CountAsError,
    /// Left out of the metrics.
    Exclude,
}

/// Identity of an evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalContext {
    pub run_id: String,
    pub train_set: String,
    pub model: String,
    pub seed: u64,
    pub preprocessing: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub run_id: String,
    pub train_set: String,
    pub test_set: String,
    pub model: String,
    pub mode: Mode,
    /// True when the test set is a different dataset from the training set.
    pub out_of_distribution: bool,
    pub seed: u64,
    pub preprocessing: String,
    pub positive: Label,
    pub documents: usize,
    /// Two-step runs: documents routed to opinion.
    pub opinion_flagged: usize,
    pub excluded_scoring: Option<ExcludedScoring>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub meta: RunMetadata,
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
}

impl EvaluationReport {
    /// Rows in label-space order followed by the macro row.
    pub fn rows(&self) -> Vec<(String, ClassMetrics)> {
        let space = LabelSpace::new(self.meta.positive.kind(), self.meta.positive).expect("label of its own kind");
        let mut rows: Vec<(String, ClassMetrics)> = space
            .labels()
            .iter()
            .map(|&l| {
                let m = if l == self.meta.positive { self.metrics.positive } else { self.metrics.negative };
                (l.as_str().to_string(), m)
            })
            .collect();
        rows.push(("macro".into(), self.metrics.macro_avg));
        rows
    }
}

fn check_space(classifier: LabelSpace, test: &LabeledCorpus) -> Result<()> {
    if classifier.kind() != test.label_space().kind() {
        return Err(Error::LabelSpaceMismatch {
            expected: classifier.kind().as_str().into(),
            found: test.label_space().kind().as_str().into(),
        });
    }
    Ok(())
}

fn report(
    ctx: &EvalContext,
    test: &LabeledCorpus,
    mode: Mode,
    out_of_distribution: bool,
    predictions: &[Label],
    labels: &[Label],
) -> Result<EvaluationReport> {
    let space = test.label_space();
    let confusion = confusion(predictions, labels, &space)?;
    Ok(EvaluationReport {
        meta: RunMetadata {
            run_id: ctx.run_id.clone(),
            train_set: ctx.train_set.clone(),
            test_set: test.name().to_string(),
            model: ctx.model.clone(),
            mode,
            out_of_distribution,
            seed: ctx.seed,
            preprocessing: ctx.preprocessing.clone(),
            positive: space.positive(),
            documents: test.len(),
            opinion_flagged: 0,
            excluded_scoring: None,
        },
        metrics: metrics(&confusion),
        confusion,
    })
}

/// Scores `classifier` on `test`; the positive class comes from the test
/// corpus.
pub fn evaluate_with<C: TextClassifier + ?Sized>(
    classifier: &C,
    test: &LabeledCorpus,
    ctx: &EvalContext,
    mode: Mode,
    out_of_distribution: bool,
) -> Result<EvaluationReport> {
    check_space(classifier.label_space(), test)?;
    let predictions: Vec<Label> = test.documents().par_iter().map(|d| classifier.predict(d)).collect();
    report(ctx, test, mode, out_of_distribution, &predictions, &test.labels())
}

/// Holdout evaluation.
pub fn evaluate<C: TextClassifier + ?Sized>(
    classifier: &C,
    test: &LabeledCorpus,
    ctx: &EvalContext,
) -> Result<EvaluationReport> {
    evaluate_with(classifier, test, ctx, Mode::OneStep, false)
}

/// [`evaluate`] on a corpus from another dataset.
pub fn cross_evaluate<C: TextClassifier + ?Sized>(
    classifier: &C,
    test: &LabeledCorpus,
    ctx: &EvalContext,
) -> Result<EvaluationReport> {
    evaluate_with(classifier, test, ctx, Mode::OneStep, true)
}

/// Evaluates a pipeline with inference-time routing: opinion-flagged
/// documents are scored according to `scoring`.
pub fn evaluate_pipeline<F, V>(
    pipeline: &TwoStepPipeline<F, V>,
    test: &LabeledCorpus,
    ctx: &EvalContext,
    out_of_distribution: bool,
    scoring: ExcludedScoring,
) -> Result<EvaluationReport>
where
    F: TextClassifier,
    V: TextClassifier,
{
    check_space(pipeline.veracity().label_space(), test)?;
    let verdicts: Vec<PipelineVerdict> = test.documents().par_iter().map(|d| pipeline.classify(d)).collect();
    let labels = test.labels();
    let mut predictions = Vec::with_capacity(labels.len());
    let mut kept_labels = Vec::with_capacity(labels.len());
    let mut flagged = 0;
    let space = test.label_space();
    for (v, &y) in verdicts.iter().zip(&labels) {
        match v.label() {
            Some(l) => {
                predictions.push(l);
                kept_labels.push(y);
            }
            None => {
                flagged += 1;
                if scoring == ExcludedScoring::CountAsError {
                    predictions.push(space.other(y));
                    kept_labels.push(y);
                }
            }
        }
    }
    let mut r = report(ctx, test, Mode::TwoStep, out_of_distribution, &predictions, &kept_labels)?;
    r.meta.opinion_flagged = flagged;
    r.meta.excluded_scoring = Some(scoring);
    Ok(r)
}

/// One-step and two-step metrics side by side for one model and dataset
/// pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub train_set: String,
    pub test_set: String,
    pub model: String,
    /// `(class, two_step, one_step)`, macro first.
    pub rows: Vec<(String, ClassMetrics, ClassMetrics)>,
}

impl ComparisonReport {
    /// A comparison from already computed macro metrics.
    pub fn from_metrics(
        train_set: impl Into<String>,
        test_set: impl Into<String>,
        model: impl Into<String>,
        two_step: ClassMetrics,
        one_step: ClassMetrics,
    ) -> Self {
        ComparisonReport {
            train_set: train_set.into(),
            test_set: test_set.into(),
            model: model.into(),
            rows: vec![("macro".into(), two_step, one_step)],
        }
    }

    /// Two-step minus one-step.
    pub fn delta(&self, class: &str, metric: Metric) -> Option<f64> {
        self.rows.iter().find(|r| r.0 == class).map(|(_, two, one)| two.get(metric) - one.get(metric))
    }

    /// Change relative to the one-step value in percent; `None` when the
    /// one-step value is 0.
    pub fn relative_change(&self, class: &str, metric: Metric) -> Option<f64> {
        let (_, two, one) = self.rows.iter().find(|r| r.0 == class)?;
        let base = one.get(metric);
        (base != 0.0).then(|| 100.0 * (two.get(metric) - base) / base)
    }
}

pub fn compare_two_step(one_step: &EvaluationReport, two_step: &EvaluationReport) -> Result<ComparisonReport> {
    let (a, b) = (&one_step.meta, &two_step.meta);
    if a.train_set != b.train_set || a.test_set != b.test_set {
        return Err(Error::Data(format!(
            "reports cover different datasets: {} -> {} versus {} -> {}",
            a.train_set, a.test_set, b.train_set, b.test_set
        )));
    }
    let one_rows = one_step.rows();
    let two_rows = two_step.rows();
    let mut rows: Vec<(String, ClassMetrics, ClassMetrics)> =
        two_rows.into_iter().zip(one_rows).map(|((class, two), (_, one))| (class, two, one)).collect();
    rows.rotate_right(1);
    Ok(ComparisonReport { train_set: a.train_set.clone(), test_set: a.test_set.clone(), model: a.model.clone(), rows })
}

/// Paths written by [`render_report`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportFiles {
    pub table: PathBuf,
    pub metrics_csv: PathBuf,
    pub confusion_csv: PathBuf,
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn csv_text(rows: Vec<Vec<String>>, path: &Path) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record(&row).map_err(|e| Error::csv(path, e))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn f3(x: f64) -> String {
    format!("{x:.3}")
}

/// The report as a table with Accuracy, Precision, Recall and F1 Score
/// columns; accuracy is printed once, on the macro row.
pub fn render_table(report: &EvaluationReport) -> String {
    let m = &report.meta;
    let mut out = String::new();
    let _ = writeln!(out, "run: {}", m.run_id);
    let _ = writeln!(
        out,
        "model: {} | train: {} | test: {} | mode: {}{}",
        m.model,
        m.train_set,
        m.test_set,
        m.mode.as_str(),
        if m.out_of_distribution { " | out-of-distribution" } else { "" }
    );
    let _ = writeln!(out, "documents: {} | positive class: {} | seed: {}", m.documents, m.positive, m.seed);
    if let Some(s) = m.excluded_scoring {
        let how = match s {
            ExcludedScoring::CountAsError => "counted as errors",
            ExcludedScoring::Exclude => "excluded from metrics",
        };
        let _ = writeln!(out, "opinion-flagged: {} ({how})", m.opinion_flagged);
    }
    let _ = writeln!(out, "preprocessing: {}", m.preprocessing);
    let _ = writeln!(out);
    let _ = writeln!(out, "{:<8} {:>9} {:>9} {:>9} {:>9}", "Class", "Accuracy", "Precision", "Recall", "F1 Score");
    for (class, c) in report.rows() {
        let acc = if class == "macro" { f3(c.accuracy) } else { String::new() };
        let _ = writeln!(out, "{class:<8} {acc:>9} {:>9} {:>9} {:>9}", f3(c.precision), f3(c.recall), f3(c.f1));
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "note: {ZERO_DIVISION_NOTE}");
    out
}

/// Header `run_id,train_set,test_set,model,mode,class,accuracy,precision,recall,f1`.
pub fn render_metrics_csv(report: &EvaluationReport) -> Result<String> {
    let m = &report.meta;
    let mut rows =
        vec![["run_id", "train_set", "test_set", "model", "mode", "class", "accuracy", "precision", "recall", "f1"]
            .map(String::from)
            .to_vec()];
    for (class, c) in report.rows() {
        rows.push(vec![
            m.run_id.clone(),
            m.train_set.clone(),
            m.test_set.clone(),
            m.model.clone(),
            m.mode.as_str().into(),
            class,
            format!("{:.6}", c.accuracy),
            format!("{:.6}", c.precision),
            format!("{:.6}", c.recall),
            format!("{:.6}", c.f1),
        ]);
    }
    csv_text(rows, Path::new("metrics.csv"))
}

/// Rows are actual labels, columns predicted labels, label-space order.
pub fn render_confusion_csv(report: &EvaluationReport) -> Result<String> {
    let c = &report.confusion;
    let space = LabelSpace::new(c.positive.kind(), c.positive)?;
    let labels = space.labels();
    let mut rows =
        vec![std::iter::once("actual\\predicted".to_string()).chain(labels.iter().map(|l| l.to_string())).collect()];
    for &actual in &labels {
        let mut row = vec![actual.to_string()];
        row.extend(labels.iter().map(|&p| c.cell(actual, p).to_string()));
        rows.push(row);
    }
    csv_text(rows, Path::new("confusion.csv"))
}

/// Writes `<stem>_table.txt`, `<stem>_metrics.csv` and
/// `<stem>_confusion.csv` into `dir`.
pub fn render_report(report: &EvaluationReport, dir: impl AsRef<Path>, stem: &str) -> Result<ReportFiles> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = ReportFiles {
        table: dir.join(format!("{stem}_table.txt")),
        metrics_csv: dir.join(format!("{stem}_metrics.csv")),
        confusion_csv: dir.join(format!("{stem}_confusion.csv")),
    };
    write(&files.table, &render_table(report))?;
    write(&files.metrics_csv, &render_metrics_csv(report)?)?;
    write(&files.confusion_csv, &render_confusion_csv(report)?)?;
    Ok(files)
}

fn signed(x: f64) -> String {
    format!("{x:+.3}")
}

/// Two Step / One Step column pairs per metric, then the deltas.
pub fn render_comparison_table(cmp: &ComparisonReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "model: {} | train: {} | test: {}", cmp.model, cmp.train_set, cmp.test_set);
    let _ = writeln!(out);
    let mut head1 = format!("{:<8}", "");
    let mut head2 = format!("{:<8}", "Class");
    for m in Metric::ALL {
        let _ = write!(head1, " {:^19}", m.title());
        let _ = write!(head2, " {:>9} {:>9}", "Two Step", "One Step");
    }
    for m in Metric::ALL {
        let _ = write!(head1, " {:>11}", format!("Δ {}", m.name()));
    }
    let _ = writeln!(out, "{}", head1.trim_end());
    let _ = writeln!(out, "{head2}");
    for (class, two, one) in &cmp.rows {
        let mut line = format!("{class:<8}");
        for m in Metric::ALL {
            let _ = write!(line, " {:>9} {:>9}", f3(two.get(m)), f3(one.get(m)));
        }
        for m in Metric::ALL {
            let _ = write!(line, " {:>11}", signed(two.get(m) - one.get(m)));
        }
        let _ = writeln!(out, "{line}");
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "Δ = two step - one step; note: {ZERO_DIVISION_NOTE}");
    out
}

/// Header `train_set,test_set,model,class,metric,two_step,one_step,delta,relative_change_pct`.
pub fn render_comparison_csv(cmp: &ComparisonReport) -> Result<String> {
    let mut rows = vec![[
        "train_set",
        "test_set",
        "model",
        "class",
        "metric",
        "two_step",
        "one_step",
        "delta",
        "relative_change_pct",
    ]
    .map(String::from)
    .to_vec()];
    for (class, two, one) in &cmp.rows {
        for m in Metric::ALL {
            rows.push(vec![
                cmp.train_set.clone(),
                cmp.test_set.clone(),
                cmp.model.clone(),
                class.clone(),
                m.name().into(),
                format!("{:.6}", two.get(m)),
                format!("{:.6}", one.get(m)),
                format!("{:+.6}", two.get(m) - one.get(m)),
                cmp.relative_change(class, m).map_or_else(|| "n/a".into(), |p| format!("{p:+.2}")),
            ]);
        }
    }
    csv_text(rows, Path::new("comparison.csv"))
}

/// Writes `<stem>_comparison.txt` and `<stem>_comparison.csv`.
pub fn render_comparison(cmp: &ComparisonReport, dir: impl AsRef<Path>, stem: &str) -> Result<(PathBuf, PathBuf)> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let table = dir.join(format!("{stem}_comparison.txt"));
    let csv_path = dir.join(format!("{stem}_comparison.csv"));
    write(&table, &render_comparison_table(cmp))?;
    write(&csv_path, &render_comparison_csv(cmp)?)?;
    Ok((table, csv_path))
}
