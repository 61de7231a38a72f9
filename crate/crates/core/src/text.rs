//! Tokenization, lemmatization and stopword handling.

use std::collections::{BTreeSet, HashMap};
use std::sync::OnceLock;

use unicode_normalization::UnicodeNormalization;
use unicode_segmentation::UnicodeSegmentation;

/// Maps a lowercase token to its lemma.
pub trait Lemmatizer: Send + Sync {
    fn lemmatize(&self, token: &str) -> String;
}

impl<F> Lemmatizer for F
where
    F: Fn(&str) -> String + Send + Sync,
{
    fn lemmatize(&self, token: &str) -> String {
        self(token)
    }
}

/// Deterministic English lemmatizer: an irregular-form table followed by
/// plural and third-person `-s` suffix rules.
///
/// Rules, applied to the lowercase token in order:
///
/// 1. irregular table (`children -> child`, `went -> go`, `is -> be`, ...)
/// 2. tokens of three characters or fewer are returned unchanged
/// 3. `-ies -> -y` (`activities -> activity`)
/// 4. `-sses -> -ss`, `-shes/-ches/-xes/-zes` drop `es` (`dishes -> dish`)
/// 5. `-ss`, `-us`, `-is`, `-ous` are left alone (`stress`, `status`)
/// 6. trailing `-s` is dropped (`values -> value`)
///
/// `-ing` and `-ed` forms are kept as-is: the seed lexicon lists many
/// participles (`isolated`, `forced`, `excluded`) and gerunds such as
/// `cooking` that must survive unchanged.
#[derive(Debug, Default, Clone, Copy)]
pub struct RuleLemmatizer;

const IRREGULAR: &[(&str, &str)] = &[
    ("am", "be"),
    ("are", "be"),
    ("is", "be"),
    ("was", "be"),
    ("were", "be"),
    ("been", "be"),
    ("has", "have"),
    ("had", "have"),
    ("does", "do"),
    ("did", "do"),
    ("done", "do"),
    ("goes", "go"),
    ("went", "go"),
    ("gone", "go"),
    ("children", "child"),
    ("men", "man"),
    ("women", "woman"),
    ("people", "person"),
    ("wives", "wife"),
    ("lives", "life"),
    ("knives", "knife"),
    ("feet", "foot"),
    ("teeth", "tooth"),
    ("mice", "mouse"),
    ("geese", "goose"),
];

fn irregular() -> &'static HashMap<&'static str, &'static str> {
    static TABLE: OnceLock<HashMap<&'static str, &'static str>> = OnceLock::new();
    TABLE.get_or_init(|| IRREGULAR.iter().copied().collect())
}

impl Lemmatizer for RuleLemmatizer {
    fn lemmatize(&self, token: &str) -> String {
        let t = token.to_lowercase();
        if let Some(lemma) = irregular().get(t.as_str()) {
            return (*lemma).to_string();
        }
        if t.chars().count() <= 3 || !t.ends_with('s') {
            return t;
        }
        if let Some(stem) = t.strip_suffix("ies") {
            if stem.chars().count() >= 2 {
                return format!("{stem}y");
            }
            return t;
        }
        if let Some(stem) = t.strip_suffix("sses") {
            return format!("{stem}ss");
        }
        for suffix in ["shes", "ches", "xes", "zes"] {
            if t.ends_with(suffix) {
                return t[..t.len() - 2].to_string();
            }
        }
        if t.ends_with("ss") || t.ends_with("us") || t.ends_with("is") {
            return t;
        }
        t[..t.len() - 1].to_string()
    }
}

/// Lowercased Unicode word segments (UAX #29).
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .unicode_words()
        .map(str::to_string)
        .collect()
}

/// NFC normalization with every whitespace run collapsed to a single space.
pub fn normalize_text(text: &str) -> String {
    let nfc: String = text.nfc().collect();
    nfc.split_whitespace().collect::<Vec<_>>().join(" ")
}

const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords_en.txt");

/// Parses a stopword list: one entry per line, `#` comments, blank lines ignored.
pub fn parse_stopwords(contents: &str) -> BTreeSet<String> {
    contents
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

/// The shipped English stopword list (version 1, 179 entries).
pub fn default_stopwords() -> BTreeSet<String> {
    parse_stopwords(DEFAULT_STOPWORDS)
}
