use std::collections::HashSet;
use std::path::PathBuf;

use newsbench::corpus::{
    generate_synthetic, load_canonical, load_isot, split, stats, write_canonical, Document, Label, LabelSpace,
    LabeledCorpus, SplitSpec, SyntheticSpec,
};
use newsbench::Error;
use proptest::prelude::*;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn corpus_of(n: usize, fake_share: f64) -> LabeledCorpus {
    let n_fake = (n as f64 * fake_share).round() as usize;
    let docs = (0..n)
        .map(|i| {
            let label = if i < n_fake { Label::Fake } else { Label::Real };
            Document::from_title_text(format!("d{i}"), "", &format!("text {i}"), Some(label), "test")
        })
        .collect();
    LabeledCorpus::new("c", LabelSpace::veracity(), docs).unwrap()
}

#[test]
fn isot_fixture_skips_empty_text() {
    let corpus = load_isot(fixture("isot_fake.csv"), fixture("isot_real.csv")).unwrap();
    assert_eq!(corpus.count(Label::Fake), 2);
    assert_eq!(corpus.count(Label::Real), 2);
    assert_eq!(corpus.skipped_rows(), 1);
    let s = stats(&corpus);
    assert_eq!(s.total, 4);
    assert_eq!(s.skipped_rows, 1);
    let first = &corpus.documents()[0];
    assert!(first.id.starts_with("isot-fake-"));
    assert_eq!(first.body, "Shocking claim Officials deny everything, sources say the truth is hidden.");
    assert!(corpus.documents().iter().any(|d| d.id.starts_with("isot-real-")));
}

#[test]
fn isot_missing_file_is_io_error() {
    let err = load_isot(fixture("nope.csv"), fixture("isot_real.csv")).unwrap_err();
    assert!(matches!(err, Error::Io { .. }), "{err:?}");
    assert!(err.to_string().contains("nope.csv"));
}

#[test]
fn canonical_fixture_is_case_insensitive() {
    let corpus = load_canonical(fixture("canonical4.csv"), LabelSpace::veracity()).unwrap();
    assert_eq!(corpus.counts(), [2, 2]);
    let ids: Vec<&str> = corpus.documents().iter().map(|d| d.id.as_str()).collect();
    assert_eq!(ids, ["a1", "a2", "a3", "a4"]);
    let s = stats(&corpus);
    assert_eq!(s.per_label, vec![(Label::Fake, 2), (Label::Real, 2)]);
}

#[test]
fn canonical_rejects_labels_from_the_other_space() {
    let err = load_canonical(fixture("factop_bad_label.csv"), LabelSpace::veracity()).unwrap_err();
    assert!(matches!(err, Error::UnknownLabel(_)), "{err:?}");
    assert!(err.to_string().contains("unknown label"));
    let ok = load_canonical(fixture("factop_bad_label.csv"), LabelSpace::subjectivity()).unwrap();
    assert_eq!(ok.count(Label::Opinion), 1);
}

#[test]
fn canonical_round_trip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = SyntheticSpec::new(15, LabelSpace::veracity(), 3, 0.5).with_opinion_rate(0.2).generate().unwrap();
    let path = dir.path().join("c.csv");
    write_canonical(&corpus, &path).unwrap();
    let back = load_canonical(&path, LabelSpace::veracity()).unwrap();
    assert_eq!(back.labels(), corpus.labels());
    for (a, b) in back.documents().iter().zip(corpus.documents()) {
        assert_eq!(a.id, b.id);
        assert_eq!(a.body, b.body);
    }
}

#[test]
fn default_split_sizes_and_stratification() {
    let corpus = corpus_of(100, 0.4);
    let (train, val, test) = split(&corpus, &SplitSpec::default()).unwrap();
    assert_eq!((train.len(), val.len(), test.len()), (80, 10, 10));
    assert_eq!(train.count(Label::Fake), 32);
    assert_eq!(val.count(Label::Fake), 4);
    assert_eq!(test.count(Label::Fake), 4);
}

#[test]
fn bad_split_fractions_are_config_errors() {
    let spec = SplitSpec { train_fraction: 0.7, ..SplitSpec::default() };
    assert!(matches!(split(&corpus_of(20, 0.5), &spec), Err(Error::Config(_))));
}

#[test]
fn synthetic_generation_is_seeded() {
    let a = generate_synthetic(20, LabelSpace::subjectivity(), 9, 0.8).unwrap();
    let b = generate_synthetic(20, LabelSpace::subjectivity(), 9, 0.8).unwrap();
    let c = generate_synthetic(20, LabelSpace::subjectivity(), 10, 0.8).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(a.counts(), [20, 20]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn split_is_a_deterministic_partition(n in 3usize..1000, share in 0.05f64..0.95, s in any::<u64>(), stratified in any::<bool>()) {
        let corpus = corpus_of(n, share);
        let spec = SplitSpec { seed: s, stratified, ..SplitSpec::default() };
        match split(&corpus, &spec) {
            Ok((train, val, test)) => {
                let mut seen = HashSet::new();
                for part in [&train, &val, &test] {
                    for d in part.documents() {
                        prop_assert!(seen.insert(d.id.clone()));
                    }
                }
                prop_assert_eq!(seen.len(), n);
                let again = split(&corpus, &spec).unwrap();
                prop_assert_eq!(&again.0, &train);
                prop_assert_eq!(&again.1, &val);
                prop_assert_eq!(&again.2, &test);
            }
            Err(e) => prop_assert!(matches!(e, Error::Data(_)), "{:?}", e),
        }
    }

    #[test]
    fn stats_per_label_sums_to_total(n_per_class in 1usize..40, s in any::<u64>(), subjectivity in any::<bool>()) {
        let space = if subjectivity { LabelSpace::subjectivity() } else { LabelSpace::veracity() };
        let corpus = generate_synthetic(n_per_class, space, s, 0.6).unwrap();
        let st = stats(&corpus);
        prop_assert_eq!(st.per_label.iter().map(|(_, c)| c).sum::<usize>(), st.total);
        prop_assert_eq!(st.total, corpus.len());
    }
}
