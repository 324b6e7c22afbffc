//! Text cleaning: URL, IPv4 and punctuation removal, whitespace collapse,
//! lowercasing, whitespace tokenization and stopword removal.
//!
//! The patterns are fixed:
//!
//! * URL: `(?i)(?:[a-z][a-z0-9+.\-]*://|www\.)\S*`
//! * IPv4: `\b\d{1,3}(?:\.\d{1,3}){3}\b`
//! * punctuation: the 32 ASCII characters ``!"#$%&'()*+,-./:;<=>?@[\]^_`{|}~``
//!
//! Each URL or address match is replaced by one space, as is each
//! punctuation character. Non-ASCII punctuation is left in place, and bare
//! domains without a scheme or `www.` prefix survive apart from their dots.

use std::collections::HashSet;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::Document;

static URL_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)(?:[a-z][a-z0-9+.\-]*://|www\.)\S*").expect("url regex"));
static IPV4_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b\d{1,3}(?:\.\d{1,3}){3}\b").expect("ipv4 regex"));

pub const PUNCTUATION: &str = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~";

pub fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
}

pub fn matches_url(s: &str) -> bool {
    URL_RE.is_match(s)
}

pub fn matches_ipv4(s: &str) -> bool {
    IPV4_RE.is_match(s)
}

/// Version tag of the embedded list.
pub const STOPWORDS_VERSION: &str = "english-179-v1";

/// Standard 179-entry English stopword list.
const ENGLISH_STOPWORDS: [&str; 179] = [
    "i",
    "me",
    "my",
    "myself",
    "we",
    "our",
    "ours",
    "ourselves",
    "you",
    "you're",
    "you've",
    "you'll",
    "you'd",
    "your",
    "yours",
    "yourself",
    "yourselves",
    "he",
    "him",
    "his",
    "himself",
    "she",
    "she's",
    "her",
    "hers",
    "herself",
    "it",
    "it's",
    "its",
    "itself",
    "they",
    "them",
    "their",
    "theirs",
    "themselves",
    "what",
    "which",
    "who",
    "whom",
    "this",
    "that",
    "that'll",
    "these",
    "those",
    "am",
    "is",
    "are",
    "was",
    "were",
    "be",
    "been",
    "being",
    "have",
    "has",
    "had",
    "having",
    "do",
    "does",
    "did",
    "doing",
    "a",
    "an",
    "the",
    "and",
    "but",
    "if",
    "or",
    "because",
    "as",
    "until",
    "while",
    "of",
    "at",
    "by",
    "for",
    "with",
    "about",
    "against",
    "between",
    "into",
    "through",
    "during",
    "before",
    "after",
    "above",
    "below",
    "to",
    "from",
    "up",
    "down",
    "in",
    "out",
    "on",
    "off",
    "over",
    "under",
    "again",
    "further",
    "then",
    "once",
    "here",
    "there",
    "when",
    "where",
    "why",
    "how",
    "all",
    "any",
    "both",
    "each",
    "few",
    "more",
    "most",
    "other",
    "some",
    "such",
    "no",
    "nor",
    "not",
    "only",
    "own",
    "same",
    "so",
    "than",
    "too",
    "very",
    "s",
    "t",
    "can",
    "will",
    "just",
    "don",
    "don't",
    "should",
    "should've",
    "now",
    "d",
    "ll",
    "m",
    "o",
    "re",
    "ve",
    "y",
    "ain",
    "aren",
    "aren't",
    "couldn",
    "couldn't",
    "didn",
    "didn't",
    "doesn",
    "doesn't",
    "hadn",
    "hadn't",
    "hasn",
    "hasn't",
    "haven",
    "haven't",
    "isn",
    "isn't",
    "ma",
    "mightn",
    "mightn't",
    "mustn",
    "mustn't",
    "needn",
    "needn't",
    "shan",
    "shan't",
    "shouldn",
    "shouldn't",
    "wasn",
    "wasn't",
    "weren",
    "weren't",
    "won",
    "won't",
    "wouldn",
    "wouldn't",
];

#[derive(Debug, Clone)]
pub struct StopwordList {
    name: String,
    ordered: Vec<String>,
    set: HashSet<String>,
}

impl StopwordList {
    pub fn english() -> Self {
        StopwordList::new(STOPWORDS_VERSION, ENGLISH_STOPWORDS.iter().copied())
    }

    pub fn empty() -> Self {
        StopwordList::new("none", std::iter::empty())
    }

    /// Entries are lowercased and stripped of whitespace-bearing words.
    pub fn new<'a>(name: &str, words: impl IntoIterator<Item = &'a str>) -> Self {
        let mut ordered = Vec::new();
        let mut set = HashSet::new();
        for w in words {
            let w = w.to_lowercase();
            if w.is_empty() || w.chars().any(char::is_whitespace) {
                continue;
            }
            if set.insert(w.clone()) {
                ordered.push(w);
            }
        }
        StopwordList { name: name.to_string(), ordered, set }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn contains(&self, token: &str) -> bool {
        self.set.contains(token)
    }

    pub fn words(&self) -> &[String] {
        &self.ordered
    }

    pub fn len(&self) -> usize {
        self.ordered.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ordered.is_empty()
    }
}

/// Preprocessing toggles; both on by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessConfig {
    pub lowercase: bool,
    pub remove_stopwords: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig { lowercase: true, remove_stopwords: true }
    }
}

impl PreprocessConfig {
    pub fn stopwords(&self) -> StopwordList {
        if self.remove_stopwords {
            StopwordList::english()
        } else {
            StopwordList::empty()
        }
    }

    /// One-line description recorded in report headers.
    pub fn describe(&self) -> String {
        format!(
            "body=title+' '+text; strip urls/ipv4/ascii-punctuation; lowercase={}; stopwords={}",
            self.lowercase,
            if self.remove_stopwords { STOPWORDS_VERSION } else { "none" }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanDocument {
    pub id: String,
    pub tokens: Vec<String>,
    /// Token count before stopword removal.
    pub original_length: usize,
}

/// Applies URL removal, IPv4 removal, punctuation removal, whitespace
/// collapse and lowercasing, in that order.
pub fn clean_text(text: &str) -> String {
    clean_text_with(text, true)
}

fn clean_text_with(text: &str, lowercase: bool) -> String {
    let no_urls = URL_RE.replace_all(text, " ");
    let no_ips = IPV4_RE.replace_all(&no_urls, " ");
    let no_punct: String = no_ips.chars().map(|c| if is_punctuation(c) { ' ' } else { c }).collect();
    let collapsed = no_punct.split_whitespace().collect::<Vec<_>>().join(" ");
    if lowercase {
        collapsed.to_lowercase()
    } else {
        collapsed
    }
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}

pub fn remove_stopwords(tokens: Vec<String>, list: &StopwordList) -> Vec<String> {
    tokens.into_iter().filter(|t| !list.contains(t)).collect()
}

/// clean → tokenize → stopword filter.
pub fn preprocess_text(text: &str, config: &PreprocessConfig, list: &StopwordList) -> (Vec<String>, usize) {
    let tokens = tokenize(&clean_text_with(text, config.lowercase));
    let original_length = tokens.len();
    (remove_stopwords(tokens, list), original_length)
}

pub fn preprocess_with(document: &Document, config: &PreprocessConfig, list: &StopwordList) -> CleanDocument {
    let (tokens, original_length) = preprocess_text(&document.body, config, list);
    CleanDocument { id: document.id.clone(), tokens, original_length }
}

/// Convenience wrapper that builds the stopword list from `config`.
pub fn preprocess(document: &Document, config: &PreprocessConfig) -> CleanDocument {
    preprocess_with(document, config, &config.stopwords())
}

/// Preprocesses many documents in parallel; output order follows input.
pub fn preprocess_all(documents: &[Document], config: &PreprocessConfig) -> Vec<CleanDocument> {
    use rayon::prelude::*;
    let list = config.stopwords();
    documents.par_iter().map(|d| preprocess_with(d, config, &list)).collect()
}

/// Splits raw text into sentences at `.`, `!` or `?` followed by whitespace.
pub fn split_sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if matches!(c, '.' | '!' | '?') {
            let end = i + c.len_utf8();
            if chars.peek().is_none_or(|(_, n)| n.is_whitespace()) {
                let s = text[start..end].trim();
                if !s.is_empty() {
                    out.push(s);
                }
                start = end;
            }
        }
    }
    let rest = text[start..].trim();
    if !rest.is_empty() {
        out.push(rest);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn clean_examples() {
        assert_eq!(clean_text("Check https://t.co/abc NOW!!!"), "check now");
        assert_eq!(clean_text(""), "");
        assert_eq!(clean_text("Server at 192.168.1.1 responded."), "server at responded");
        assert_eq!(clean_text("see www.Example.com/x?y=1 or example.com"), "see or example com");
        assert_eq!(clean_text("It's “quoted” \u{2014} fine"), "it s “quoted” \u{2014} fine");
    }

    #[test]
    fn punctuation_set_is_the_ascii_32() {
        assert_eq!(PUNCTUATION.chars().count(), 32);
        assert!(PUNCTUATION.chars().all(is_punctuation));
        let all_ascii_punct = (0u8..128).filter(|b| (*b as char).is_ascii_punctuation()).count();
        assert_eq!(all_ascii_punct, 32);
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("check now"), vec!["check", "now"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("a  b\tc"), vec!["a", "b", "c"]);
    }

    #[test]
    fn stopword_list_shape() {
        let list = StopwordList::english();
        assert_eq!(list.len(), 179);
        assert!(list.words().iter().all(|w| w.to_lowercase() == *w && !w.contains(char::is_whitespace)));
    }

    #[test]
    fn remove_stopwords_examples() {
        let list = StopwordList::english();
        let toks = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        assert_eq!(remove_stopwords(toks(&["the", "cat", "sat"]), &list), toks(&["cat", "sat"]));
        assert!(remove_stopwords(vec![], &list).is_empty());
        assert_eq!(remove_stopwords(toks(&["cat", "mat"]), &list), toks(&["cat", "mat"]));
    }

    #[test]
    fn preprocess_examples() {
        let config = PreprocessConfig::default();
        let d = Document::from_text("x", "The cat!");
        let clean = preprocess(&d, &config);
        assert_eq!(clean.tokens, vec!["cat"]);
        assert_eq!(clean.original_length, 2);

        let empty = preprocess(&Document::from_text("e", ""), &config);
        assert!(empty.tokens.is_empty());
        assert_eq!(empty.original_length, 0);
    }

    #[test]
    fn sentence_splitting() {
        assert_eq!(
            split_sentences("One two. Three? Four! v1.2 stays"),
            vec!["One two.", "Three?", "Four!", "v1.2 stays"]
        );
        assert!(split_sentences("  ").is_empty());
    }

    fn text_strategy() -> impl Strategy<Value = String> {
        let piece = prop_oneof![
            "[A-Za-z]{1,8}",
            "[0-9]{1,3}\\.[0-9]{1,3}\\.[0-9]{1,3}\\.[0-9]{1,3}",
            "(https?://|www\\.)[a-z./?=]{0,10}",
            "[!-/:-@\\[-`{-~]{1,3}",
            "(The|and|it's|Über|café|“x”)",
            "[ \t\n]{1,2}",
        ];
        proptest::collection::vec(piece, 0..20).prop_map(|v| v.join(" "))
    }

    proptest! {
        #[test]
        fn idempotent(text in text_strategy()) {
            let config = PreprocessConfig::default();
            let first = preprocess(&Document::from_text("a", &text), &config);
            let again = preprocess(&Document::from_text("a", &first.tokens.join(" ")), &config);
            prop_assert_eq!(first.tokens, again.tokens);
        }

        #[test]
        fn output_is_pure(text in text_strategy()) {
            let config = PreprocessConfig::default();
            let list = StopwordList::english();
            let clean = preprocess(&Document::from_text("a", &text), &config);
            for t in &clean.tokens {
                prop_assert!(!matches_url(t));
                prop_assert!(!matches_ipv4(t));
                prop_assert!(!t.chars().any(is_punctuation));
                prop_assert!(!list.contains(t));
                prop_assert!(!t.is_empty());
            }
        }

        #[test]
        fn cleaning_never_lengthens(text in text_strategy()) {
            prop_assert!(clean_text(&text).chars().count() <= text.chars().count());
        }
    }
}
