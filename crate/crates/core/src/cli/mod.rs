//! Command-line front end: run configs, subcommands and exit codes.
//!
//! Every command that reads a config writes the resolved config as
//! `<command>.config.json` into the output directory. Re-running with that
//! file reproduces the outputs byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{
    load_canonical, load_isot, split, stats, write_canonical, Label, LabelKind, LabelSpace, LabeledCorpus, SplitSpec,
    SyntheticSpec,
};
use crate::error::{Error, Result};
use crate::eval::{
    compare_two_step, evaluate_pipeline, evaluate_with, render_comparison, render_confusion_csv, render_metrics_csv,
    render_table, EvalContext, EvaluationReport, ExcludedScoring, Mode,
};
use crate::model::{fit, FeatureConfig, FittedModel, ModelConfig, ModelSpec};
use crate::pipeline::{check_tau, train_two_step, DEFAULT_TAU};
use crate::preprocess::{preprocess_all, PreprocessConfig};
use crate::seed;

/// Process exit status for an error: 1 configuration, 2 data, 3 training.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => 1,
        Error::Io { .. }
        | Error::Csv { .. }
        | Error::MissingColumn { .. }
        | Error::UnknownLabel(_)
        | Error::DuplicateId(_)
        | Error::EmptyText(_)
        | Error::Data(_)
        | Error::LabelSpaceMismatch { .. }
        | Error::Serde(_) => 2,
        Error::SingleClass(_)
        | Error::ClassEliminated(_)
        | Error::NonFiniteGradient(_)
        | Error::NonFiniteLoss(_)
        | Error::NoTargets(_)
        | Error::Numerical(_) => 3,
    }
}

/// Where a corpus comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "format", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    /// The two ISOT files (`title`, `text` columns).
    Isot {
        fake: PathBuf,
        real: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
    },
    /// A canonical `id,title,text,label` CSV.
    Canonical {
        path: PathBuf,
        #[serde(default = "veracity")]
        labels: LabelKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
    },
    Synthetic {
        n_per_class: usize,
        #[serde(default = "veracity")]
        labels: LabelKind,
        #[serde(default = "one")]
        separation: f64,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        opinion_rate: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
    },
}

fn veracity() -> LabelKind {
    LabelKind::Veracity
}

fn one() -> f64 {
    1.0
}

impl DatasetSource {
    pub fn kind(&self) -> LabelKind {
        match self {
            DatasetSource::Isot { .. } => LabelKind::Veracity,
            DatasetSource::Canonical { labels, .. } | DatasetSource::Synthetic { labels, .. } => *labels,
        }
    }

    fn default_space(&self) -> LabelSpace {
        match self.kind() {
            LabelKind::Veracity => LabelSpace::veracity(),
            LabelKind::Subjectivity => LabelSpace::subjectivity(),
        }
    }

    pub fn load(&self) -> Result<LabeledCorpus> {
        let (corpus, name) = match self {
            DatasetSource::Isot { fake, real, name } => (load_isot(fake, real)?, name),
            DatasetSource::Canonical { path, name, .. } => (load_canonical(path, self.default_space())?, name),
            DatasetSource::Synthetic { n_per_class, separation, seed, opinion_rate, name, .. } => (
                SyntheticSpec::new(*n_per_class, self.default_space(), *seed, *separation)
                    .with_opinion_rate(*opinion_rate)
                    .generate()?,
                name,
            ),
        };
        Ok(match name {
            Some(n) => corpus.rename(n.clone()),
            None => corpus,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub train: DatasetSource,
    /// Out-of-distribution test set for `crosseval` and `pipeline`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<DatasetSource>,
    /// Fact/opinion corpus for the filter.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factop: Option<DatasetSource>,
}

/// Split fractions; the shuffle seed is derived from the run seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitConfig {
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub stratified: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        let s = SplitSpec::default();
        SplitConfig {
            train_fraction: s.train_fraction,
            val_fraction: s.val_fraction,
            test_fraction: s.test_fraction,
            stratified: s.stratified,
        }
    }
}

impl SplitConfig {
    pub fn spec(&self, run_seed: u64, tag: &str) -> SplitSpec {
        SplitSpec {
            train_fraction: self.train_fraction,
            val_fraction: self.val_fraction,
            test_fraction: self.test_fraction,
            seed: seed::derive(run_seed, tag, 0),
            stratified: self.stratified,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub tau: f64,
    /// Learner for the opinion filter.
    pub filter: ModelConfig,
    /// Route test documents through the filter when scoring the two-step
    /// run. Off: the filter only cleans the training data.
    pub inference_routing: bool,
    /// How routed-out test documents are scored.
    pub excluded: ExcludedScoring,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            tau: DEFAULT_TAU,
            filter: ModelConfig::default(),
            inference_routing: false,
            excluded: ExcludedScoring::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    #[serde(default)]
    pub features: FeatureConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    /// Positive class for veracity metrics; `fake` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positive: Option<Label>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
}

fn default_seed() -> u64 {
    42
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn model_spec(&self) -> ModelSpec {
        ModelSpec { model: self.model.clone(), features: self.features, preprocess: self.preprocess }
    }

    pub fn filter_spec(&self) -> ModelSpec {
        ModelSpec { model: self.pipeline.filter.clone(), features: self.features, preprocess: self.preprocess }
    }

    pub fn validate(&self) -> Result<()> {
        self.split.spec(self.seed, "split").validate()?;
        self.model_spec().validate()?;
        self.filter_spec().validate()?;
        check_tau(self.pipeline.tau)?;
        if self.data.train.kind() != LabelKind::Veracity {
            return Err(Error::Config("data.train must be a veracity corpus".into()));
        }
        if let Some(p) = self.positive {
            if p.kind() != LabelKind::Veracity {
                return Err(Error::Config(format!("positive class `{p}` is not a veracity label")));
            }
        }
        if let Some(f) = &self.data.factop {
            if f.kind() != LabelKind::Subjectivity {
                return Err(Error::Config("data.factop must be a subjectivity corpus".into()));
            }
        }
        for src in [Some(&self.data.train), self.data.test.as_ref(), self.data.factop.as_ref()].into_iter().flatten() {
            if let DatasetSource::Synthetic { n_per_class, separation, opinion_rate, .. } = src {
                if *n_per_class == 0 || !(0.0..=1.0).contains(separation) || !(0.0..=1.0).contains(opinion_rate) {
                    return Err(Error::Config(
                        "synthetic datasets need n_per_class >= 1 and separation, opinion_rate in [0, 1]".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    fn with_positive(&self, corpus: LabeledCorpus) -> Result<LabeledCorpus> {
        match self.positive {
            Some(p) if corpus.label_space().kind() == p.kind() => corpus.with_positive(p),
            _ => Ok(corpus),
        }
    }

    /// Identifier for reports: a hash of the command and the resolved
    /// config apart from its output directory.
    pub fn run_id(&self, command: &str) -> String {
        let located = RunConfig { out_dir: PathBuf::new(), ..self.clone() };
        let mut h = Sha256::new();
        h.update(command.as_bytes());
        h.update([0]);
        h.update(located.to_json().as_bytes());
        format!("{command}-{}", &hex::encode(h.finalize())[..12])
    }
}

#[derive(Debug, Parser)]
#[command(name = "newsbench", version, about = "Fake-news classification workbench")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Worker threads for data-parallel work; results do not depend on it
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print dataset statistics
    Stats(StatsArgs),
    /// Write a synthetic corpus as canonical CSV
    Synth(SynthArgs),
    /// Clean and tokenize the training corpus
    Preprocess(RunArgs),
    /// Fit a model on the train split
    Train(RunArgs),
    /// Evaluate a model on the holdout split
    Eval(EvalArgs),
    /// Evaluate a model on the out-of-distribution test set
    Crosseval(EvalArgs),
    /// Train one-step and two-step models and compare them
    Pipeline(PipelineArgs),
    /// Re-render saved report JSON files
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// ISOT fake and real CSVs
    #[arg(long, num_args = 2, value_names = ["FAKE", "REAL"], conflicts_with = "canonical")]
    pub isot: Option<Vec<PathBuf>>,
    /// Canonical id,title,text,label CSV
    #[arg(long)]
    pub canonical: Option<PathBuf>,
    /// Label space of a canonical CSV
    #[arg(long, value_enum, default_value_t = KindArg::Veracity)]
    pub labels: KindArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    Veracity,
    Subjectivity,
}

impl From<KindArg> for LabelKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Veracity => LabelKind::Veracity,
            KindArg::Subjectivity => LabelKind::Subjectivity,
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = KindArg::Veracity)]
    pub labels: KindArg,
    #[arg(long, default_value_t = 200)]
    pub n_per_class: usize,
    #[arg(long, default_value_t = 1.0)]
    pub separation: f64,
    #[arg(long, default_value_t = 0.0)]
    pub opinion_rate: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON run config
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `seed`
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `out_dir`
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Render {
    Table,
    Csv,
    All,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Model file; defaults to `<out_dir>/model.json`
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Render::All)]
    pub render: Render,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Overrides `pipeline.tau`
    #[arg(long)]
    pub tau: Option<f64>,
    /// Overrides `pipeline.inference_routing`
    #[arg(long)]
    pub routing: bool,
    #[arg(long, value_enum, default_value_t = Render::All)]
    pub render: Render,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Report JSON written by eval, crosseval or pipeline
    #[arg(long)]
    pub report: PathBuf,
    /// Two-step report JSON; `--report` is then the one-step side
    #[arg(long)]
    pub compare: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Render::All)]
    pub render: Render,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Stats(_) => "stats",
            Command::Synth(_) => "synth",
            Command::Preprocess(_) => "preprocess",
            Command::Train(_) => "train",
            Command::Eval(_) => "eval",
            Command::Crosseval(_) => "crosseval",
            Command::Pipeline(_) => "pipeline",
            Command::Report(_) => "report",
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    if cli.threads == 0 {
        return Err(Error::Config("--threads must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Stats(a) => cmd_stats(&a),
        Command::Synth(a) => cmd_synth(&a),
        Command::Preprocess(a) => cmd_preprocess(&resolve(&a, "preprocess")?),
        Command::Train(a) => cmd_train(&resolve(&a, "train")?),
        Command::Eval(a) => cmd_eval(&resolve(&a.run, "eval")?, a.model.as_deref(), a.render, false),
        Command::Crosseval(a) => cmd_eval(&resolve(&a.run, "crosseval")?, a.model.as_deref(), a.render, true),
        Command::Pipeline(a) => {
            let mut cfg = load_config(&a.run)?;
            if let Some(t) = a.tau {
                cfg.pipeline.tau = t;
            }
            if a.routing {
                cfg.pipeline.inference_routing = true;
            }
            cfg.validate()?;
            persist(&cfg, "pipeline")?;
            cmd_pipeline(&cfg, a.render)
        }
        Command::Report(a) => cmd_report(&a),
    })
}

fn load_config(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::read(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = &args.out {
        cfg.out_dir = o.clone();
    }
    Ok(cfg)
}

fn resolve(args: &RunArgs, command: &str) -> Result<RunConfig> {
    let cfg = load_config(args)?;
    cfg.validate()?;
    persist(&cfg, command)?;
    Ok(cfg)
}

fn persist(cfg: &RunConfig, command: &str) -> Result<()> {
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    write_file(&cfg.out_dir.join(format!("{command}.config.json")), &cfg.to_json())
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn cmd_stats(args: &StatsArgs) -> Result<()> {
    let corpus = match (&args.isot, &args.canonical) {
        (Some(p), None) => load_isot(&p[0], &p[1])?,
        (None, Some(p)) => {
            let space = match LabelKind::from(args.labels) {
                LabelKind::Veracity => LabelSpace::veracity(),
                LabelKind::Subjectivity => LabelSpace::subjectivity(),
            };
            load_canonical(p, space)?
        }
        _ => return Err(Error::Config("stats needs exactly one of --isot or --canonical".into())),
    };
    print!("{}", stats(&corpus).render());
    Ok(())
}

pub fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let space = match LabelKind::from(args.labels) {
        LabelKind::Veracity => LabelSpace::veracity(),
        LabelKind::Subjectivity => LabelSpace::subjectivity(),
    };
    let corpus = SyntheticSpec::new(args.n_per_class, space, args.seed, args.separation)
        .with_opinion_rate(args.opinion_rate)
        .generate()?;
    write_canonical(&corpus, &args.out)?;
    log::info!("wrote {} documents to {}", corpus.len(), args.out.display());
    Ok(())
}

struct Splits {
    train: LabeledCorpus,
    val: LabeledCorpus,
    test: LabeledCorpus,
}

fn load_splits(cfg: &RunConfig) -> Result<Splits> {
    let corpus = cfg.with_positive(cfg.data.train.load()?)?;
    let (train, val, test) = split(&corpus, &cfg.split.spec(cfg.seed, "split"))?;
    Ok(Splits { train, val, test })
}

pub fn cmd_preprocess(cfg: &RunConfig) -> Result<()> {
    let corpus = cfg.data.train.load()?;
    let clean = preprocess_all(corpus.documents(), &cfg.preprocess);
    let path = cfg.out_dir.join("tokens.tsv");
    let mut text = String::new();
    for c in &clean {
        if c.id.contains(['\t', '\n', '\r']) {
            return Err(Error::Data(format!(
                "document id `{}` cannot be written to a token file",
                c.id.escape_debug()
            )));
        }
        text.push_str(&c.id);
        text.push('\t');
        text.push_str(&c.tokens.join(" "));
        text.push('\n');
    }
    write_file(&path, &text)?;
    log::info!("preprocessed {} documents into {}", clean.len(), path.display());
    Ok(())
}

pub fn cmd_train(cfg: &RunConfig) -> Result<()> {
    let s = load_splits(cfg)?;
    log::info!("training {} on {} documents", cfg.model.kind().as_str(), s.train.len());
    let fitted = fit(&cfg.model_spec(), &s.train, Some(&s.val), cfg.seed)?;
    let path = cfg.out_dir.join("model.json");
    fitted.model.save(&path)?;
    let mut log_text = fitted.log.join("\n");
    log_text.push('\n');
    write_file(&cfg.out_dir.join("train.log"), &log_text)?;
    for line in &fitted.log {
        log::info!("{line}");
    }
    log::info!("saved {}", path.display());
    Ok(())
}

fn context(cfg: &RunConfig, command: &str, train_set: &str, model: &str, preprocess: &PreprocessConfig) -> EvalContext {
    EvalContext {
        run_id: cfg.run_id(command),
        train_set: train_set.to_string(),
        model: model.to_string(),
        seed: cfg.seed,
        preprocessing: preprocess.describe(),
    }
}

fn write_report(report: &EvaluationReport, dir: &Path, stem: &str, render: Render) -> Result<()> {
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    write_file(&dir.join(format!("{stem}_report.json")), &json)?;
    if matches!(render, Render::Table | Render::All) {
        write_file(&dir.join(format!("{stem}_table.txt")), &render_table(report))?;
    }
    if matches!(render, Render::Csv | Render::All) {
        write_file(&dir.join(format!("{stem}_metrics.csv")), &render_metrics_csv(report)?)?;
        write_file(&dir.join(format!("{stem}_confusion.csv")), &render_confusion_csv(report)?)?;
    }
    Ok(())
}

fn test_target(cfg: &RunConfig, holdout: LabeledCorpus, cross: bool) -> Result<LabeledCorpus> {
    if !cross {
        return Ok(holdout);
    }
    match &cfg.data.test {
        Some(src) => cfg.with_positive(src.load()?),
        None => Err(Error::Config("crosseval needs data.test".into())),
    }
}

pub fn cmd_eval(cfg: &RunConfig, model: Option<&Path>, render: Render, cross: bool) -> Result<()> {
    let command = if cross { "crosseval" } else { "eval" };
    if cross && cfg.data.test.is_none() {
        return Err(Error::Config("crosseval needs data.test".into()));
    }
    let model_path = model.map(Path::to_path_buf).unwrap_or_else(|| cfg.out_dir.join("model.json"));
    let model = FittedModel::load(&model_path)?;
    let s = load_splits(cfg)?;
    let train_name = s.train.name().to_string();
    let test = test_target(cfg, s.test, cross)?;
    let ctx = context(cfg, command, &train_name, model.kind().as_str(), &model.preprocess_config());
    let report = evaluate_with(&model, &test, &ctx, Mode::OneStep, cross)?;
    write_report(&report, &cfg.out_dir, command, render)?;
    log::info!(
        "{command}: {} on {} accuracy {:.6} macro-f1 {:.6}",
        report.meta.model,
        report.meta.test_set,
        report.metrics.macro_avg.accuracy,
        report.metrics.macro_avg.f1
    );
    Ok(())
}

pub fn cmd_pipeline(cfg: &RunConfig, render: Render) -> Result<()> {
    let factop_src = cfg.data.factop.as_ref().ok_or_else(|| Error::Config("pipeline needs data.factop".into()))?;
    let s = load_splits(cfg)?;
    let cross = cfg.data.test.is_some();
    let train_name = s.train.name().to_string();
    let test = test_target(cfg, s.test, cross)?;
    let factop = factop_src.load()?;
    let spec = cfg.model_spec();

    let one = fit(&spec, &s.train, Some(&s.val), cfg.seed)?;
    let (pipeline, two_log) = train_two_step(
        &s.train,
        Some(&s.val),
        &factop,
        &cfg.filter_spec(),
        &spec,
        cfg.pipeline.tau,
        &cfg.split.spec(cfg.seed, "factop-split"),
        cfg.seed,
    )?;
    let mut log_text: String = one.log.iter().map(|l| format!("one-step {l}\n")).collect();
    log_text.extend(two_log.iter().map(|l| format!("two-step {l}\n")));
    write_file(&cfg.out_dir.join("pipeline.log"), &log_text)?;
    pipeline.save(cfg.out_dir.join("pipeline.json"))?;

    let kind = spec.model.kind().as_str();
    let ctx = context(cfg, "pipeline", &train_name, kind, &cfg.preprocess);
    let one_report = evaluate_with(&one.model, &test, &ctx, Mode::OneStep, cross)?;
    let two_report = if cfg.pipeline.inference_routing {
        evaluate_pipeline(&pipeline, &test, &ctx, cross, cfg.pipeline.excluded)?
    } else {
        evaluate_with(pipeline.veracity(), &test, &ctx, Mode::TwoStep, cross)?
    };
    write_report(&one_report, &cfg.out_dir, "one_step", render)?;
    write_report(&two_report, &cfg.out_dir, "two_step", render)?;
    let cmp = compare_two_step(&one_report, &two_report)?;
    render_comparison(&cmp, &cfg.out_dir, "pipeline")?;
    let p = pipeline.provenance();
    log::info!(
        "pipeline: filter removed {} of {} training documents; macro-f1 one-step {:.6} two-step {:.6}",
        p.train_removed,
        p.train_documents,
        one_report.metrics.macro_avg.f1,
        two_report.metrics.macro_avg.f1
    );
    Ok(())
}

fn read_report(path: &Path) -> Result<EvaluationReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn cmd_report(args: &ReportArgs) -> Result<()> {
    let first = read_report(&args.report)?;
    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let stem = args.report.file_stem().and_then(|s| s.to_str()).unwrap_or("report").trim_end_matches("_report");
    match &args.compare {
        Some(second) => {
            let cmp = compare_two_step(&first, &read_report(second)?)?;
            render_comparison(&cmp, &args.out, stem)?;
        }
        None => {
            if matches!(args.render, Render::Table | Render::All) {
                write_file(&args.out.join(format!("{stem}_table.txt")), &render_table(&first))?;
            }
            if matches!(args.render, Render::Csv | Render::All) {
                write_file(&args.out.join(format!("{stem}_metrics.csv")), &render_metrics_csv(&first)?)?;
                write_file(&args.out.join(format!("{stem}_confusion.csv")), &render_confusion_csv(&first)?)?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_unknown_keys() {
        let cfg = RunConfig::from_json(r#"{"data": {"train": {"format": "synthetic", "n_per_class": 10}}}"#).unwrap();
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.pipeline.tau, 0.5);
        cfg.validate().unwrap();
        let again = RunConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(again, cfg);

        for bad in [
            r#"{"data": {"train": {"format": "synthetic", "n_per_class": 10}}, "sede": 1}"#,
            r#"{"data": {"train": {"format": "synthetic", "n_per_class": 10, "extra": 1}}}"#,
            r#"{"data": {"train": {"format": "synthetic", "n_per_class": 10}}, "model": {"kind": "logreg", "lrr": 1}}"#,
            r#"{"data": {"train": {"format": "synthetic", "n_per_class": 10}}, "split": {"train_fraction": 0.8, "x": 1}}"#,
        ] {
            assert!(matches!(RunConfig::from_json(bad), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn validation_rejects_bad_fractions() {
        let mut cfg =
            RunConfig::from_json(r#"{"data": {"train": {"format": "synthetic", "n_per_class": 10}}}"#).unwrap();
        cfg.split.test_fraction = 0.0;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), 1);
        assert_eq!(exit_code(&Error::Data("x".into())), 2);
        assert_eq!(exit_code(&Error::SingleClass("x".into())), 3);
    }
}
