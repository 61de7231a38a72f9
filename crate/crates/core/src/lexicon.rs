//! Identity-scoped bias lexicon.
//!
//! Each entry pairs a single-token lemma with an [`IdentitySelector`] naming
//! the identities it attaches to. Lexicons are read from and written to a
//! CSV file with the header
//!
//! ```text
//! lemma,religions,genders,marital_statuses,children,provenance,source_note
//! ```
//!
//! Multi-valued selector fields are `|`-separated and an empty field is a
//! wildcard. Provenance is one of `literature`, `manual_synonym` or
//! `auto_synonym`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::identity::{Children, Gender, Identity, MaritalStatus, Religion};
use crate::text::Lemmatizer;

pub const DEFAULT_SIMILARITY_THRESHOLD: f64 = 0.5;

const SEED_LEXICON: &str = include_str!("../data/seed_lexicon.csv");
const HEADER: [&str; 7] = [
    "lemma",
    "religions",
    "genders",
    "marital_statuses",
    "children",
    "provenance",
    "source_note",
];

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: duplicate entry `{lemma}` for selector {selector}")]
    DuplicateEntry {
        line: u64,
        lemma: String,
        selector: String,
    },
    #[error("line {line}: entry `{lemma}` has an all-wildcard selector")]
    EmptySelector { line: u64, lemma: String },
    #[error("provider failed while expanding seed `{seed}`: {message}")]
    ProviderFailure { seed: String, message: String },
    #[error("similarity threshold {0} is outside [0, 1]")]
    InvalidThreshold(f64),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Constraint on identities. `None` fields are wildcards.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct IdentitySelector {
    pub religion: Option<BTreeSet<Religion>>,
    pub gender: Option<BTreeSet<Gender>>,
    pub marital_status: Option<BTreeSet<MaritalStatus>>,
    pub children: Option<BTreeSet<Children>>,
}

fn field_matches<T: Ord>(field: &Option<BTreeSet<T>>, value: &T) -> bool {
    field.as_ref().is_none_or(|set| set.contains(value))
}

impl IdentitySelector {
    pub fn is_wildcard(&self) -> bool {
        self.religion.is_none()
            && self.gender.is_none()
            && self.marital_status.is_none()
            && self.children.is_none()
    }

    fn has_empty_constraint(&self) -> bool {
        self.religion.as_ref().is_some_and(BTreeSet::is_empty)
            || self.gender.as_ref().is_some_and(BTreeSet::is_empty)
            || self.marital_status.as_ref().is_some_and(BTreeSet::is_empty)
            || self.children.as_ref().is_some_and(BTreeSet::is_empty)
    }

    pub fn religion(mut self, values: impl IntoIterator<Item = Religion>) -> Self {
        self.religion = Some(values.into_iter().collect());
        self
    }

    pub fn gender(mut self, values: impl IntoIterator<Item = Gender>) -> Self {
        self.gender = Some(values.into_iter().collect());
        self
    }

    pub fn marital_status(mut self, values: impl IntoIterator<Item = MaritalStatus>) -> Self {
        self.marital_status = Some(values.into_iter().collect());
        self
    }

    pub fn children(mut self, values: impl IntoIterator<Item = Children>) -> Self {
        self.children = Some(values.into_iter().collect());
        self
    }
}

impl fmt::Display for IdentitySelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{{religion:{} gender:{} marital:{} children:{}}}",
            join_field(&self.religion),
            join_field(&self.gender),
            join_field(&self.marital_status),
            join_field(&self.children)
        )
    }
}

/// True iff every constrained field contains the identity's value.
pub fn matches(selector: &IdentitySelector, identity: &Identity) -> bool {
    field_matches(&selector.religion, &identity.religion)
        && field_matches(&selector.gender, &identity.gender)
        && field_matches(&selector.marital_status, &identity.marital_status)
        && field_matches(&selector.children, &identity.children)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Literature,
    ManualSynonym,
    AutoSynonym,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Literature => "literature",
            Provenance::ManualSynonym => "manual_synonym",
            Provenance::AutoSynonym => "auto_synonym",
        }
    }
}

impl FromStr for Provenance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "literature" => Ok(Provenance::Literature),
            "manual_synonym" => Ok(Provenance::ManualSynonym),
            "auto_synonym" => Ok(Provenance::AutoSynonym),
            other => Err(format!("unknown provenance `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BiasTerm {
    pub lemma: String,
    pub selector: IdentitySelector,
    pub provenance: Provenance,
    /// Citation for literature terms; the seed lemma for auto synonyms.
    pub source_note: String,
}

/// A single-token, lowercase lemma.
pub fn is_valid_lemma(lemma: &str) -> bool {
    !lemma.is_empty()
        && lemma == lemma.to_lowercase()
        && !lemma.chars().any(|c| c.is_whitespace() || c == '_')
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub index: usize,
    pub lemma: String,
    pub reason: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "entry {} (`{}`): {}", self.index, self.lemma, self.reason)
    }
}

/// Bias lexicon with unique `(lemma, selector)` pairs, in insertion order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BiasLexicon {
    entries: Vec<BiasTerm>,
}

impl BiasLexicon {
    pub fn entries(&self) -> &[BiasTerm] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, lemma: &str, selector: &IdentitySelector) -> bool {
        self.entries
            .iter()
            .any(|e| e.lemma == lemma && &e.selector == selector)
    }

    /// Builds a lexicon from entries, rejecting any invariant breach.
    pub fn from_entries(entries: Vec<BiasTerm>) -> Result<Self, LexiconError> {
        let mut seen = BTreeSet::new();
        for (i, e) in entries.iter().enumerate() {
            let line = i as u64 + 1;
            check_entry(e).map_err(|message| LexiconError::Parse { line, message })?;
            if e.selector.is_wildcard() {
                return Err(LexiconError::EmptySelector {
                    line,
                    lemma: e.lemma.clone(),
                });
            }
            if !seen.insert((e.lemma.clone(), e.selector.clone())) {
                return Err(LexiconError::DuplicateEntry {
                    line,
                    lemma: e.lemma.clone(),
                    selector: e.selector.to_string(),
                });
            }
        }
        Ok(BiasLexicon { entries })
    }

    /// Every distinct lemma in the lexicon.
    pub fn lemmas(&self) -> BTreeSet<String> {
        self.entries.iter().map(|e| e.lemma.clone()).collect()
    }

    /// Maps every lemma through `lemmatizer`, keeping the first entry of any
    /// `(lemma, selector)` pair that collapses together. Used to align the
    /// lexicon with corpus tokens before scoring.
    pub fn lemmatized(&self, lemmatizer: &dyn Lemmatizer) -> BiasLexicon {
        let mut seen = BTreeSet::new();
        let mut entries = Vec::with_capacity(self.entries.len());
        for e in &self.entries {
            let lemma = lemmatizer.lemmatize(&e.lemma);
            if lemma.is_empty() {
                continue;
            }
            if seen.insert((lemma.clone(), e.selector.clone())) {
                entries.push(BiasTerm {
                    lemma,
                    ..e.clone()
                });
            }
        }
        BiasLexicon { entries }
    }
}

fn check_entry(e: &BiasTerm) -> Result<(), String> {
    if !is_valid_lemma(&e.lemma) {
        return Err(format!(
            "lemma `{}` must be a non-empty lowercase single token",
            e.lemma
        ));
    }
    if e.selector.has_empty_constraint() {
        return Err("constrained selector field is empty".into());
    }
    if e.provenance == Provenance::AutoSynonym && e.source_note.trim().is_empty() {
        return Err("auto synonym without a recorded seed".into());
    }
    Ok(())
}

/// The shipped seed lexicon: literature terms plus manual additions.
pub fn seed_lexicon() -> BiasLexicon {
    load_lexicon(SEED_LEXICON.as_bytes()).expect("shipped seed lexicon is valid")
}

fn parse_field<T: FromStr + Ord>(raw: &str, line: u64, name: &str) -> Result<Option<BTreeSet<T>>, LexiconError>
where
    T::Err: fmt::Display,
{
    let raw = raw.trim();
    if raw.is_empty() {
        return Ok(None);
    }
    raw.split('|')
        .map(|v| {
            v.parse::<T>().map_err(|e| LexiconError::Parse {
                line,
                message: format!("{name}: {e}"),
            })
        })
        .collect::<Result<BTreeSet<T>, _>>()
        .map(Some)
}

fn join_field<T: fmt::Debug>(field: &Option<BTreeSet<T>>) -> String {
    match field {
        None => "*".to_string(),
        Some(set) => set
            .iter()
            .map(|v| format!("{v:?}"))
            .collect::<Vec<_>>()
            .join("|"),
    }
}

fn write_field<T: fmt::Debug>(field: &Option<BTreeSet<T>>) -> String {
    match field {
        None => String::new(),
        Some(_) => join_field(field),
    }
}

/// Reads the lexicon CSV format. Rows must form a valid lexicon.
pub fn load_lexicon<R: Read>(source: R) -> Result<BiasLexicon, LexiconError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    if !headers.is_empty() && headers.iter().map(str::trim).ne(HEADER) {
        return Err(LexiconError::Parse {
            line: 1,
            message: format!("expected header `{}`", HEADER.join(",")),
        });
    }
    let mut entries = Vec::new();
    let mut seen = BTreeSet::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let lemma = row[0].trim().to_string();
        if lemma.split_whitespace().count() > 1 {
            return Err(LexiconError::Parse {
                line,
                message: format!("multi-word term `{lemma}` is not supported"),
            });
        }
        let selector = IdentitySelector {
            religion: parse_field(&row[1], line, "religions")?,
            gender: parse_field(&row[2], line, "genders")?,
            marital_status: parse_field(&row[3], line, "marital_statuses")?,
            children: parse_field(&row[4], line, "children")?,
        };
        let provenance = row[5]
            .parse::<Provenance>()
            .map_err(|message| LexiconError::Parse { line, message })?;
        let term = BiasTerm {
            lemma,
            selector,
            provenance,
            source_note: row[6].to_string(),
        };
        check_entry(&term).map_err(|message| LexiconError::Parse { line, message })?;
        if term.selector.is_wildcard() {
            return Err(LexiconError::EmptySelector {
                line,
                lemma: term.lemma,
            });
        }
        if !seen.insert((term.lemma.clone(), term.selector.clone())) {
            return Err(LexiconError::DuplicateEntry {
                line,
                selector: term.selector.to_string(),
                lemma: term.lemma,
            });
        }
        entries.push(term);
    }
    Ok(BiasLexicon { entries })
}

/// Writes the lexicon CSV format; `load_lexicon` reads it back unchanged.
pub fn write_lexicon<W: Write>(lexicon: &BiasLexicon, sink: W) -> Result<(), LexiconError> {
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(sink);
    writer.write_record(HEADER)?;
    for e in &lexicon.entries {
        writer.write_record([
            e.lemma.as_str(),
            &write_field(&e.selector.religion),
            &write_field(&e.selector.gender),
            &write_field(&e.selector.marital_status),
            &write_field(&e.selector.children),
            e.provenance.as_str(),
            &e.source_note,
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Union of lemmas whose selector matches `identity`.
pub fn applicable_terms(lexicon: &BiasLexicon, identity: &Identity) -> BTreeSet<String> {
    lexicon
        .entries
        .iter()
        .filter(|e| matches(&e.selector, identity))
        .map(|e| e.lemma.clone())
        .collect()
}

/// One record per broken invariant; empty for a valid lexicon.
pub fn validate_lexicon(lexicon: &BiasLexicon) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen = BTreeMap::new();
    for (index, e) in lexicon.entries.iter().enumerate() {
        let mut push = |reason: String| {
            out.push(Violation {
                index,
                lemma: e.lemma.clone(),
                reason,
            })
        };
        if let Err(reason) = check_entry(e) {
            push(reason);
        }
        if e.selector.is_wildcard() {
            push("all-wildcard selector".into());
        }
        if let Some(first) = seen.insert((e.lemma.clone(), e.selector.clone()), index) {
            push(format!("duplicates entry {first}"));
        }
    }
    out
}

impl BiasLexicon {
    /// Wraps entries without checking invariants. Pair with [`validate_lexicon`].
    pub fn from_entries_unchecked(entries: Vec<BiasTerm>) -> Self {
        BiasLexicon { entries }
    }
}

#[derive(Debug, Error)]
#[error("{0}")]
pub struct ProviderError(pub String);

/// Candidate synonyms for a lemma.
pub trait SynonymProvider {
    fn synonyms(&self, lemma: &str) -> Result<Vec<String>, ProviderError>;
}

/// Semantic similarity in `[-1, 1]`.
pub trait SimilarityOracle {
    fn similarity(&self, a: &str, b: &str) -> Result<f64, ProviderError>;
}

/// Synonym table: `lemma,synonym` rows, many rows per lemma allowed.
#[derive(Debug, Clone, Default)]
pub struct TableSynonyms {
    table: BTreeMap<String, Vec<String>>,
}

impl TableSynonyms {
    pub fn insert(&mut self, lemma: &str, synonym: &str) {
        self.table
            .entry(lemma.to_string())
            .or_default()
            .push(synonym.to_string());
    }

    pub fn from_csv<R: Read>(source: R) -> Result<Self, LexiconError> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
        let mut out = TableSynonyms::default();
        for row in reader.records() {
            let row = row?;
            if row.len() < 2 {
                return Err(LexiconError::Parse {
                    line: row.position().map_or(0, |p| p.line()),
                    message: "expected `lemma,synonym`".into(),
                });
            }
            out.insert(row[0].trim(), row[1].trim());
        }
        Ok(out)
    }
}

impl SynonymProvider for TableSynonyms {
    fn synonyms(&self, lemma: &str) -> Result<Vec<String>, ProviderError> {
        Ok(self.table.get(lemma).cloned().unwrap_or_default())
    }
}

/// Symmetric similarity table: `a,b,score` rows. Unlisted pairs score 0 and
/// a lemma compared with itself scores 1.
#[derive(Debug, Clone, Default)]
pub struct TableSimilarity {
    table: BTreeMap<(String, String), f64>,
}

impl TableSimilarity {
    fn key(a: &str, b: &str) -> (String, String) {
        if a <= b {
            (a.to_string(), b.to_string())
        } else {
            (b.to_string(), a.to_string())
        }
    }

    pub fn insert(&mut self, a: &str, b: &str, score: f64) {
        self.table.insert(Self::key(a, b), score);
    }

    pub fn from_csv<R: Read>(source: R) -> Result<Self, LexiconError> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
        let mut out = TableSimilarity::default();
        for row in reader.records() {
            let row = row?;
            let line = row.position().map_or(0, |p| p.line());
            if row.len() < 3 {
                return Err(LexiconError::Parse {
                    line,
                    message: "expected `a,b,score`".into(),
                });
            }
            let score: f64 = row[2].trim().parse().map_err(|_| LexiconError::Parse {
                line,
                message: format!("bad score `{}`", &row[2]),
            })?;
            if !(-1.0..=1.0).contains(&score) {
                return Err(LexiconError::Parse {
                    line,
                    message: format!("score {score} outside [-1, 1]"),
                });
            }
            out.insert(row[0].trim(), row[1].trim(), score);
        }
        Ok(out)
    }
}

impl SimilarityOracle for TableSimilarity {
    fn similarity(&self, a: &str, b: &str) -> Result<f64, ProviderError> {
        if a == b {
            return Ok(1.0);
        }
        Ok(self.table.get(&Self::key(a, b)).copied().unwrap_or(0.0))
    }
}

/// Adds every synonym of every entry whose similarity to its seed reaches
/// `threshold` as an [`Provenance::AutoSynonym`] entry with the seed's selector.
///
/// Candidates are lowercased; multi-word candidates and those equal to the
/// seed are skipped. Pairs already present are not duplicated.
pub fn expand_lexicon(
    lexicon: &BiasLexicon,
    synonyms: &dyn SynonymProvider,
    similarity: &dyn SimilarityOracle,
    threshold: f64,
) -> Result<BiasLexicon, LexiconError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(LexiconError::InvalidThreshold(threshold));
    }
    let mut seen: BTreeSet<(String, IdentitySelector)> = lexicon
        .entries
        .iter()
        .map(|e| (e.lemma.clone(), e.selector.clone()))
        .collect();
    let mut entries = lexicon.entries.clone();
    for seed in &lexicon.entries {
        let fail = |e: ProviderError| LexiconError::ProviderFailure {
            seed: seed.lemma.clone(),
            message: e.0,
        };
        for candidate in synonyms.synonyms(&seed.lemma).map_err(fail)? {
            let candidate = candidate.trim().to_lowercase();
            if candidate == seed.lemma || !is_valid_lemma(&candidate) {
                continue;
            }
            let score = similarity.similarity(&seed.lemma, &candidate).map_err(fail)?;
            if score < threshold {
                continue;
            }
            if seen.insert((candidate.clone(), seed.selector.clone())) {
                entries.push(BiasTerm {
                    lemma: candidate,
                    selector: seed.selector.clone(),
                    provenance: Provenance::AutoSynonym,
                    source_note: seed.lemma.clone(),
                });
            }
        }
    }
    Ok(BiasLexicon { entries })
}
