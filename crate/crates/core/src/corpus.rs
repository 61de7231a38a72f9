//! Generation records, cleaning, preprocessing and document assembly.
//!
//! A [`Document`] gathers every preprocessed token generated for one
//! (language, method, identity, application kind) cell. The four story
//! locations share one story document. Documents are grouped into one
//! [`Corpus`] per (language, method).

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::identity::{
    debias_instruction, render_application_prompt, Application, ApplicationKind, Identity,
    Language, PromptMethod,
};
use crate::text::{normalize_text, tokenize, Lemmatizer};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: line {line}: {source}")]
    Json {
        path: String,
        line: usize,
        source: serde_json::Error,
    },
    #[error("duplicate record id `{0}`")]
    DuplicateRecordId(String),
    #[error("invalid record `{id}`: {message}")]
    InvalidRecord { id: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub language: Language,
    pub method: PromptMethod,
    pub identity: Identity,
    pub application: Application,
    pub prompt_text: String,
    pub raw_output: String,
    /// English translation used for analysis.
    pub english_text: String,
    pub record_id: String,
}

impl GenerationRecord {
    pub fn document_key(&self) -> DocumentKey {
        DocumentKey {
            language: self.language,
            method: self.method,
            identity: self.identity,
            application: self.application.kind,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DocumentKey {
    pub language: Language,
    pub method: PromptMethod,
    pub identity: Identity,
    pub application: ApplicationKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub key: DocumentKey,
    pub tokens: Vec<String>,
}

impl Document {
    pub fn new(key: DocumentKey, tokens: Vec<String>) -> Self {
        Document { key, tokens }
    }

    pub fn total_terms(&self) -> usize {
        self.tokens.len()
    }

    pub fn distinct_terms(&self) -> BTreeSet<&str> {
        self.tokens.iter().map(String::as_str).collect()
    }

    pub fn count(&self, term: &str) -> usize {
        self.tokens.iter().filter(|t| *t == term).count()
    }
}

/// Documents of one (language, method) cell, keyed and ordered by [`DocumentKey`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    documents: BTreeMap<DocumentKey, Document>,
    // document frequency per term, set semantics
    df: BTreeMap<String, usize>,
}

impl Corpus {
    pub fn new(documents: impl IntoIterator<Item = Document>) -> Self {
        let documents: BTreeMap<_, _> = documents.into_iter().map(|d| (d.key, d)).collect();
        let mut df = BTreeMap::new();
        for doc in documents.values() {
            for term in doc.distinct_terms() {
                *df.entry(term.to_string()).or_insert(0) += 1;
            }
        }
        Corpus { documents, df }
    }

    /// Number of documents.
    pub fn n(&self) -> usize {
        self.documents.len()
    }

    pub fn documents(&self) -> impl Iterator<Item = &Document> {
        self.documents.values()
    }

    pub fn get(&self, key: &DocumentKey) -> Option<&Document> {
        self.documents.get(key)
    }

    pub fn document_frequency(&self, term: &str) -> usize {
        self.df.get(term).copied().unwrap_or(0)
    }

    pub fn contains(&self, doc: &Document) -> bool {
        self.documents.get(&doc.key).is_some_and(|d| d == doc)
    }

    /// (language, method) shared by every document, if any.
    pub fn cell(&self) -> Option<(Language, PromptMethod)> {
        self.documents
            .keys()
            .next()
            .map(|k| (k.language, k.method))
    }
}

/// Guesses whether a text is English.
pub trait LanguageDetector: Send + Sync {
    fn is_english(&self, text: &str) -> bool;
}

/// Script-based stub: English iff at least 90% of alphabetic characters are
/// ASCII and at least one alphabetic character exists.
#[derive(Debug, Default, Clone, Copy)]
pub struct ScriptDetector;

impl LanguageDetector for ScriptDetector {
    fn is_english(&self, text: &str) -> bool {
        let (ascii, total) = text
            .chars()
            .filter(|c| c.is_alphabetic())
            .fold((0usize, 0usize), |(a, t), c| (a + c.is_ascii() as usize, t + 1));
        total > 0 && ascii * 10 >= total * 9
    }
}

/// Accepts everything.
#[derive(Debug, Default, Clone, Copy)]
pub struct AcceptAll;

impl LanguageDetector for AcceptAll {
    fn is_english(&self, _: &str) -> bool {
        true
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningSummary {
    pub input: usize,
    pub kept: usize,
    pub dropped_duplicate: usize,
    pub dropped_non_english: usize,
    pub dropped_empty: usize,
    /// Surviving records per `<language>_<method>`.
    pub kept_per_cell: BTreeMap<String, usize>,
}

/// Normalizes text, then drops empty, non-English and duplicate records.
///
/// Duplicates are records whose normalized `english_text` repeats within the
/// same document key; the first occurrence survives.
pub fn clean_records(
    records: impl IntoIterator<Item = GenerationRecord>,
    detector: &dyn LanguageDetector,
) -> (Vec<GenerationRecord>, CleaningSummary) {
    let mut summary = CleaningSummary::default();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for mut record in records {
        summary.input += 1;
        record.english_text = normalize_text(&record.english_text);
        if record.english_text.is_empty() {
            summary.dropped_empty += 1;
            continue;
        }
        if !detector.is_english(&record.english_text) {
            summary.dropped_non_english += 1;
            continue;
        }
        if !seen.insert((record.document_key(), record.english_text.clone())) {
            summary.dropped_duplicate += 1;
            continue;
        }
        *summary
            .kept_per_cell
            .entry(cell_name(record.language, record.method))
            .or_insert(0) += 1;
        out.push(record);
    }
    summary.kept = out.len();
    (out, summary)
}

pub fn cell_name(language: Language, method: PromptMethod) -> String {
    format!("{}_{}", language.name().to_lowercase(), method.label())
}

const HOBBIES_FRAME: [&str; 3] = ["personal", "value", "interest"];
const STORY_LOCATIONS: [&str; 4] = ["school", "hospital", "home", "workplace"];

/// Lemmas removed from a document on top of stopwords.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Exclusions {
    lemmas: BTreeSet<String>,
}

impl Exclusions {
    /// Fixed frame words for an application kind.
    pub fn for_application(kind: ApplicationKind) -> Self {
        let words: &[&str] = match kind {
            ApplicationKind::TodoList => &[],
            ApplicationKind::HobbiesValues => &HOBBIES_FRAME,
            ApplicationKind::Story => &STORY_LOCATIONS,
        };
        Exclusions {
            lemmas: words.iter().map(|w| w.to_string()).collect(),
        }
    }

    /// Adds the lemma of every token in `text`.
    pub fn with_text(mut self, text: &str, lemmatizer: &dyn Lemmatizer) -> Self {
        self.lemmas
            .extend(tokenize(text).iter().map(|t| lemmatizer.lemmatize(t)));
        self
    }

    /// Exclusions for a record: frame words, plus for stories the lemmas of
    /// the application prompt and of any debiasing instruction.
    pub fn for_record(record: &GenerationRecord, lemmatizer: &dyn Lemmatizer) -> Self {
        let kind = record.application.kind;
        let mut ex = Exclusions::for_application(kind);
        if kind == ApplicationKind::Story {
            if let Ok(prompt) =
                render_application_prompt(&record.identity, &record.application, record.language)
            {
                ex = ex.with_text(&prompt, lemmatizer);
            }
            if let Some(instruction) = debias_instruction(record.method) {
                ex = ex.with_text(instruction, lemmatizer);
            }
        }
        ex
    }

    pub fn contains(&self, lemma: &str) -> bool {
        self.lemmas.contains(lemma)
    }

    pub fn lemmas(&self) -> &BTreeSet<String> {
        &self.lemmas
    }
}

/// Lowercase, split on word boundaries, lemmatize, then drop stopwords and
/// the application's frame words.
pub fn preprocess(
    text: &str,
    app: &Application,
    lemmatizer: &dyn Lemmatizer,
    stopwords: &BTreeSet<String>,
) -> Vec<String> {
    preprocess_with(text, &Exclusions::for_application(app.kind), lemmatizer, stopwords)
}

pub fn preprocess_with(
    text: &str,
    exclusions: &Exclusions,
    lemmatizer: &dyn Lemmatizer,
    stopwords: &BTreeSet<String>,
) -> Vec<String> {
    tokenize(text)
        .iter()
        .map(|t| lemmatizer.lemmatize(t))
        .filter(|l| !l.is_empty() && !stopwords.contains(l) && !exclusions.contains(l))
        .collect()
}

/// Builds one corpus per (language, method).
///
/// Records sharing a document key are concatenated in `record_id` order
/// before preprocessing.
pub fn build_corpus(
    records: &[GenerationRecord],
    lemmatizer: &dyn Lemmatizer,
    stopwords: &BTreeSet<String>,
) -> BTreeMap<(Language, PromptMethod), Corpus> {
    let mut grouped: BTreeMap<DocumentKey, Vec<&GenerationRecord>> = BTreeMap::new();
    for r in records {
        grouped.entry(r.document_key()).or_default().push(r);
    }
    let documents: Vec<Document> = grouped
        .into_par_iter()
        .map(|(key, mut recs)| {
            recs.sort_by(|a, b| a.record_id.cmp(&b.record_id));
            let tokens = recs
                .iter()
                .flat_map(|r| {
                    let ex = Exclusions::for_record(r, lemmatizer);
                    preprocess_with(&r.english_text, &ex, lemmatizer, stopwords)
                })
                .collect();
            Document::new(key, tokens)
        })
        .collect();
    let mut by_cell: BTreeMap<(Language, PromptMethod), Vec<Document>> = BTreeMap::new();
    for doc in documents {
        by_cell
            .entry((doc.key.language, doc.key.method))
            .or_default()
            .push(doc);
    }
    by_cell
        .into_iter()
        .map(|(cell, docs)| (cell, Corpus::new(docs)))
        .collect()
}

/// Reads JSON Lines records, rejecting duplicate ids and malformed
/// applications. Blank lines are skipped.
pub fn read_records(path: &Path) -> Result<Vec<GenerationRecord>, CorpusError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut ids = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: GenerationRecord =
            serde_json::from_str(&line).map_err(|source| CorpusError::Json {
                path: path.display().to_string(),
                line: i + 1,
                source,
            })?;
        record
            .application
            .validate()
            .map_err(|e| CorpusError::InvalidRecord {
                id: record.record_id.clone(),
                message: e.to_string(),
            })?;
        if !ids.insert(record.record_id.clone()) {
            return Err(CorpusError::DuplicateRecordId(record.record_id));
        }
        out.push(record);
    }
    Ok(out)
}

pub fn corpus_file_name(language: Language, method: PromptMethod) -> String {
    format!("corpus_{}.jsonl", cell_name(language, method))
}

/// Writes `corpus_<language>_<method>.jsonl` files and `cleaning_summary.json`.
pub fn write_corpus_dir(
    dir: &Path,
    corpora: &BTreeMap<(Language, PromptMethod), Corpus>,
    summary: &CleaningSummary,
) -> Result<(), CorpusError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for (&(language, method), corpus) in corpora {
        let path = dir.join(corpus_file_name(language, method));
        let mut w = BufWriter::new(fs::File::create(&path).map_err(io_err(&path))?);
        for doc in corpus.documents() {
            let line = serde_json::to_string(doc).expect("document serializes");
            writeln!(w, "{line}").map_err(io_err(&path))?;
        }
        w.flush().map_err(io_err(&path))?;
    }
    let path = dir.join("cleaning_summary.json");
    let json = serde_json::to_string_pretty(summary).expect("summary serializes");
    fs::write(&path, json + "\n").map_err(io_err(&path))?;
    Ok(())
}

/// Loads every `corpus_*.jsonl` file in `dir`.
pub fn read_corpus_dir(dir: &Path) -> Result<BTreeMap<(Language, PromptMethod), Corpus>, CorpusError> {
    let mut docs: BTreeMap<(Language, PromptMethod), Vec<Document>> = BTreeMap::new();
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("corpus_") && n.ends_with(".jsonl"))
        })
        .collect();
    paths.sort();
    for path in paths {
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let doc: Document = serde_json::from_str(line).map_err(|source| CorpusError::Json {
                path: path.display().to_string(),
                line: i + 1,
                source,
            })?;
            docs.entry((doc.key.language, doc.key.method))
                .or_default()
                .push(doc);
        }
    }
    Ok(docs
        .into_iter()
        .map(|(cell, d)| (cell, Corpus::new(d)))
        .collect())
}
