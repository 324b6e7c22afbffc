use newsbench::baselines::{Probabilities, TextClassifier};
use newsbench::corpus::{split, Document, LabelSpace, LabeledCorpus, SplitSpec, SyntheticSpec};
use newsbench::model::{fit, ModelSpec};
use newsbench::pipeline::{
    filter_corpus, train_opinion_filter, train_two_step, OpinionFilter, PipelineVerdict, TwoStepPipeline,
};
use newsbench::Error;
use proptest::prelude::*;

struct Constant(f64);

impl TextClassifier for Constant {
    fn label_space(&self) -> LabelSpace {
        LabelSpace::subjectivity()
    }

    fn predict_proba(&self, _: &Document) -> Probabilities {
        Probabilities([1.0 - self.0, self.0])
    }
}

fn veracity() -> (LabeledCorpus, LabeledCorpus, LabeledCorpus) {
    let corpus = SyntheticSpec::new(100, LabelSpace::veracity(), 31, 0.9).with_opinion_rate(0.3).generate().unwrap();
    split(&corpus, &SplitSpec::with_seed(31)).unwrap()
}

fn factop() -> LabeledCorpus {
    SyntheticSpec::new(60, LabelSpace::subjectivity(), 32, 1.0).generate().unwrap()
}

#[test]
fn synthetic_filter_is_accurate() {
    let (filter, report) =
        train_opinion_filter(&factop(), &ModelSpec::default(), 0.5, &SplitSpec::with_seed(3), 3).unwrap();
    assert!(report.holdout_accuracy >= 0.95, "{}", report.holdout_accuracy);
    assert_eq!(report.documents, 120);
    assert_eq!(report.train_documents + report.test_documents + 12, 120);
    assert_eq!(filter.tau(), 0.5);
}

#[test]
fn filter_needs_a_subjectivity_corpus() {
    let (train, _, _) = veracity();
    let err = train_opinion_filter(&train, &ModelSpec::default(), 0.5, &SplitSpec::default(), 0).unwrap_err();
    assert!(matches!(err, Error::LabelSpaceMismatch { .. }));
}

#[test]
fn identity_and_annihilating_filters() {
    let (train, val, _) = veracity();
    let pass = OpinionFilter::new(Constant(0.0), 0.5).unwrap();
    let (kept, removed) = filter_corpus(&train, &pass);
    assert_eq!((kept.documents(), removed), (train.documents(), 0));
    let block = OpinionFilter::new(Constant(0.9), 0.5).unwrap();
    let (kept, removed) = filter_corpus(&train, &block);
    assert!(kept.is_empty());
    assert_eq!(removed, train.len());
    let err =
        newsbench::pipeline::train_veracity_stage(block, "block", None, &train, Some(&val), &ModelSpec::default(), 0)
            .err()
            .unwrap();
    assert!(matches!(err, Error::ClassEliminated(_)), "{err:?}");
}

#[test]
fn trained_pipeline_end_to_end() {
    let (train, val, test) = veracity();
    let spec = ModelSpec::default();
    let (pipeline, log) =
        train_two_step(&train, Some(&val), &factop(), &spec, &spec, 0.5, &SplitSpec::with_seed(4), 4).unwrap();
    assert!(!log.is_empty());
    let p = pipeline.provenance();
    assert_eq!(p.train_documents, train.len());
    assert_eq!(p.val_documents, val.len());
    assert!(p.train_removed > 0 && p.train_removed < train.len());
    assert_eq!(p.train_counts_after.iter().sum::<usize>(), train.len() - p.train_removed);
    assert!(p.filter.as_ref().unwrap().holdout_accuracy >= 0.95);

    for d in test.documents() {
        let v = pipeline.classify(d);
        let p_op = pipeline.filter().opinion_probability(d);
        match v {
            PipelineVerdict::OpinionExcluded { confidence } => {
                assert!(p_op >= 0.5);
                assert_eq!(confidence, p_op);
            }
            PipelineVerdict::Veracity { label, confidence } => {
                assert!(p_op < 0.5);
                let probs = pipeline.veracity().predict_proba(d);
                assert_eq!(label, pipeline.veracity().predict(d));
                assert_eq!(confidence, probs.get(&LabelSpace::veracity(), label));
            }
        }
    }

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pipeline.json");
    let manifest = pipeline.save(&path).unwrap();
    assert_eq!(manifest.filter_model, "pipeline.filter.json");
    let back = TwoStepPipeline::load(&path).unwrap();
    assert_eq!(back.provenance(), pipeline.provenance());
    for d in test.documents() {
        assert_eq!(back.classify(d), pipeline.classify(d));
    }

    let (again, _) =
        train_two_step(&train, Some(&val), &factop(), &spec, &spec, 0.5, &SplitSpec::with_seed(4), 4).unwrap();
    assert!(test.documents().iter().all(|d| again.classify(d) == pipeline.classify(d)));
}

#[test]
fn near_one_threshold_matches_one_step() {
    let (train, val, test) = veracity();
    let spec = ModelSpec::default();
    let tau = 1.0 - 1e-9;
    let (pipeline, _) =
        train_two_step(&train, Some(&val), &factop(), &spec, &spec, tau, &SplitSpec::with_seed(5), 5).unwrap();
    assert_eq!(pipeline.provenance().train_removed, 0);
    assert_eq!(pipeline.provenance().val_removed, 0);
    let one = fit(&spec, &train, Some(&val), 5).unwrap().model;
    for d in test.documents() {
        assert_eq!(pipeline.classify(d).label(), Some(one.predict(d)));
    }
}

#[test]
fn empty_document_gets_a_verdict() {
    let (train, val, _) = veracity();
    let spec = ModelSpec::default();
    let (pipeline, _) =
        train_two_step(&train, Some(&val), &factop(), &spec, &spec, 0.5, &SplitSpec::with_seed(6), 6).unwrap();
    let v = pipeline.classify(&Document::from_text("empty", ""));
    assert!(v.confidence().is_finite());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn filtering_only_removes(p in 0.0f64..=1.0, tau in 0.01f64..0.99) {
        let (train, _, _) = veracity();
        let filter = OpinionFilter::new(Constant(p), tau).unwrap();
        let (kept, removed) = filter_corpus(&train, &filter);
        prop_assert_eq!(kept.len() + removed, train.len());
        prop_assert_eq!(removed == 0, p < tau);
        prop_assert!(kept.documents().iter().all(|d| train.documents().contains(d)));
    }
}
