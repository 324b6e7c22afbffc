use newsbench::corpus::Document;
use newsbench::features::{
    build_vocab, count_vector, encode_sequence, fit_tfidf, smoothed_idf, tfidf_transform, VocabMeta, Vocabulary,
    ID_OFFSET, OOV_ID, PAD_ID,
};
use newsbench::preprocess::{
    clean_text, is_punctuation, matches_ipv4, matches_url, preprocess, preprocess_all, remove_stopwords, tokenize,
    PreprocessConfig, StopwordList,
};
use proptest::prelude::*;

fn toks(words: &[&str]) -> Vec<String> {
    words.iter().map(|w| w.to_string()).collect()
}

#[test]
fn cleaning_examples() {
    assert_eq!(clean_text("Check https://t.co/abc NOW!!!"), "check now");
    assert_eq!(clean_text(""), "");
    assert_eq!(clean_text("Server at 192.168.1.1 responded."), "server at responded");
    assert_eq!(clean_text("see www.example.com/page or example.com"), "see or example com");
}

#[test]
fn preprocess_chain() {
    let d = Document::from_text("x", "The cat!");
    let clean = preprocess(&d, &PreprocessConfig::default());
    assert_eq!(clean.tokens, ["cat"]);
    assert_eq!(clean.original_length, 2);
    let empty = preprocess(&Document::from_text("e", ""), &PreprocessConfig::default());
    assert!(empty.tokens.is_empty());
    assert_eq!(empty.original_length, 0);
    let keep = PreprocessConfig { remove_stopwords: false, ..Default::default() };
    assert_eq!(preprocess(&d, &keep).tokens, ["the", "cat"]);
}

#[test]
fn stopwords() {
    let list = StopwordList::english();
    assert_eq!(list.len(), 179);
    assert_eq!(remove_stopwords(toks(&["the", "cat", "sat"]), &list), ["cat", "sat"]);
    assert!(remove_stopwords(vec![], &list).is_empty());
    assert_eq!(remove_stopwords(toks(&["cat", "sat"]), &list), ["cat", "sat"]);
}

#[test]
fn preprocess_all_keeps_order() {
    let docs: Vec<Document> =
        (0..50).map(|i| Document::from_text(format!("d{i}"), &format!("word{i} and more"))).collect();
    let out = preprocess_all(&docs, &PreprocessConfig::default());
    for (i, c) in out.iter().enumerate() {
        assert_eq!(c.id, format!("d{i}"));
        assert_eq!(c.tokens, [format!("word{i}")]);
    }
}

#[test]
fn vocabulary_examples() {
    let docs = vec![toks(&["a", "b"]), toks(&["a"])];
    let v = build_vocab(&docs, 10, 1).unwrap();
    assert_eq!(v.tokens(), ["a", "b"]);
    assert_eq!(build_vocab(&docs, 10, 2).unwrap().tokens(), ["a"]);
    assert_eq!(build_vocab(&docs, 1, 1).unwrap().tokens(), ["a"]);
    let empty: Vec<Vec<String>> = vec![];
    assert!(build_vocab(&empty, 10, 1).is_err());
}

#[test]
fn tfidf_examples() {
    let corpus = vec![toks(&["cat", "cat", "dog"]), toks(&["dog", "fish"])];
    let vocab = build_vocab(&corpus, 10, 1).unwrap();
    let model = fit_tfidf(&corpus, vocab).unwrap();
    let idf = |t: &str| model.idf()[model.vocab().get(t).unwrap() as usize];
    assert!((idf("cat") - ((1.5f64).ln() + 1.0)).abs() < 1e-12);
    assert!((idf("dog") - 1.0).abs() < 1e-12);
    assert!((idf("fish") - 1.4055).abs() < 1e-4);
    let v = tfidf_transform(&corpus[0], &model);
    let cat = model.vocab().get("cat").unwrap();
    let dog = model.vocab().get("dog").unwrap();
    assert!((v.get(cat) - 0.9422).abs() < 1e-4);
    assert!((v.get(dog) - 0.3352).abs() < 1e-4);
    assert!(tfidf_transform::<String>(&[], &model).is_empty());
}

#[test]
fn sequences_and_counts() {
    let vocab = build_vocab(&[toks(&["cat", "dog", "cat"])], 10, 1).unwrap();
    let s = encode_sequence(&toks(&["cat", "dog", "cat"]), &vocab, 5);
    assert_eq!(s.ids, [2, 3, 2, 0, 0]);
    assert_eq!(s.actual_len, 3);
    assert_eq!(encode_sequence(&toks(&["zzz"]), &vocab, 3).ids, [OOV_ID, PAD_ID, PAD_ID]);
    let long = encode_sequence(&toks(&["cat"; 10]), &vocab, 4);
    assert_eq!((long.ids.len(), long.actual_len), (4, 4));
    assert_eq!(ID_OFFSET, 2);

    let c = count_vector(&["cat", "cat", "dog"], &vocab);
    assert_eq!(c.iter().collect::<Vec<_>>(), [(0, 2.0), (1, 1.0)]);
    assert!(count_vector(&["z"], &vocab).is_empty());
}

#[test]
fn vocabulary_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = vec![toks(&["b", "a", "c"]), toks(&["a", "c"]), toks(&["c"])];
    let vocab = build_vocab(&corpus, 10, 1).unwrap();
    let path = dir.path().join("v.tsv");
    vocab.write(&path).unwrap();
    let meta: VocabMeta = vocab.meta();
    let back = Vocabulary::read(&path, meta).unwrap();
    assert_eq!(back.tokens(), vocab.tokens());
    assert_eq!(back.hash(), vocab.hash());
}

fn word() -> impl Strategy<Value = String> {
    prop_oneof![
        "[a-zA-Z]{1,8}",
        Just("the".to_string()),
        Just("http://x.io/a?b=1".to_string()),
        Just("10.0.0.255".to_string()),
        "[!-/:-@]{1,3}",
    ]
}

proptest! {
    #[test]
    fn pipeline_output_is_clean_and_idempotent(words in prop::collection::vec(word(), 0..30)) {
        let text = words.join(" ");
        let config = PreprocessConfig::default();
        let list = StopwordList::english();
        let first = preprocess(&Document::from_text("p", &text), &config);
        for t in &first.tokens {
            prop_assert!(!matches_url(t) && !matches_ipv4(t));
            prop_assert!(!t.chars().any(is_punctuation));
            prop_assert!(!list.contains(t));
        }
        let again = preprocess(&Document::from_text("p", &first.tokens.join(" ")), &config);
        prop_assert_eq!(again.tokens, first.tokens);
        prop_assert_eq!(tokenize(&clean_text(&text)).len(), first.original_length);
    }

    #[test]
    fn idf_is_at_least_one(n in 1usize..10_000, df_share in 0.0f64..=1.0) {
        let df = ((n as f64) * df_share) as usize;
        prop_assert!(smoothed_idf(n, df.max(1)) >= 1.0);
    }
}
