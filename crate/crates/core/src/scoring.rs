//! Bias TF-IDF, bias scores and overall TF-IDF.
//!
//! For a term `t`, document `d` and corpus of `N` documents:
//!
//! ```text
//! tf(t, d)    = count(t, d) / |d|          (0 for an empty document)
//! df(t)       = |{d : t in d}|
//! idf(t)      = ln((N + 1) / (df(t) + 1)) + 1
//! tfidf(t, d) = tf(t, d) * idf(t)
//! ```
//!
//! A document's bias score is the sum of `tfidf` over the lexicon terms that
//! occur in it. Overall TF-IDF uses the same arithmetic over every term.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Document, DocumentKey};
use crate::lexicon::{applicable_terms, BiasLexicon};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScoringError {
    #[error("corpus has no documents")]
    EmptyCorpus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Scope {
    /// Only terms whose selector matches the document's identity.
    #[default]
    #[serde(rename = "identity", alias = "identity_scoped")]
    IdentityScoped,
    /// Every lexicon term regardless of selector.
    #[serde(rename = "all", alias = "all_terms")]
    AllTerms,
}

impl std::str::FromStr for Scope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "identity" | "identity_scoped" => Ok(Scope::IdentityScoped),
            "all" | "all_terms" => Ok(Scope::AllTerms),
            other => Err(format!("unknown scope `{other}` (expected identity|all)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermStat {
    pub lemma: String,
    pub tf: f64,
    pub df: usize,
    pub idf: f64,
    pub tfidf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredTerm {
    pub lemma: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreCell {
    pub key: DocumentKey,
    pub bias_score: f64,
    pub per_term: BTreeMap<String, f64>,
    pub top_term: Option<ScoredTerm>,
}

impl ScoreCell {
    /// Assembles a cell from per-term values: the score is their sum and the
    /// top term their argmax.
    pub fn from_terms(key: DocumentKey, per_term: BTreeMap<String, f64>) -> Self {
        let bias_score = per_term.values().sum();
        let top_term = argmax(per_term.iter().map(|(k, v)| (k.as_str(), *v)));
        ScoreCell {
            key,
            bias_score,
            per_term,
            top_term,
        }
    }
}

/// Largest value; ties go to the lexicographically smaller lemma.
pub fn argmax<'a>(items: impl IntoIterator<Item = (&'a str, f64)>) -> Option<ScoredTerm> {
    let mut best: Option<(&str, f64)> = None;
    for (lemma, value) in items {
        best = match best {
            Some((bl, bv)) if bv > value || (bv == value && bl <= lemma) => Some((bl, bv)),
            _ => Some((lemma, value)),
        };
    }
    best.map(|(lemma, value)| ScoredTerm {
        lemma: lemma.to_string(),
        value,
    })
}

pub fn bias_tf(term: &str, doc: &Document) -> f64 {
    let total = doc.total_terms();
    if total == 0 {
        return 0.0;
    }
    doc.count(term) as f64 / total as f64
}

pub fn bias_df(term: &str, corpus: &Corpus) -> usize {
    corpus.document_frequency(term)
}

pub fn idf_from_counts(n: usize, df: usize) -> f64 {
    ((n as f64 + 1.0) / (df as f64 + 1.0)).ln() + 1.0
}

pub fn bias_idf(term: &str, corpus: &Corpus) -> Result<f64, ScoringError> {
    if corpus.n() == 0 {
        return Err(ScoringError::EmptyCorpus);
    }
    Ok(idf_from_counts(corpus.n(), bias_df(term, corpus)))
}

pub fn bias_tfidf(term: &str, doc: &Document, corpus: &Corpus) -> Result<f64, ScoringError> {
    let tf = bias_tf(term, doc);
    let idf = bias_idf(term, corpus)?;
    Ok(tf * idf)
}

pub fn term_stat(term: &str, doc: &Document, corpus: &Corpus) -> Result<TermStat, ScoringError> {
    let tf = bias_tf(term, doc);
    let idf = bias_idf(term, corpus)?;
    Ok(TermStat {
        lemma: term.to_string(),
        tf,
        df: bias_df(term, corpus),
        idf,
        tfidf: tf * idf,
    })
}

/// Overall TF-IDF: the bias TF-IDF formula applied to any vocabulary term.
pub fn overall_tfidf(term: &str, doc: &Document, corpus: &Corpus) -> Result<f64, ScoringError> {
    bias_tfidf(term, doc, corpus)
}

/// Lexicon terms eligible for `doc` under `scope`.
pub fn scoped_terms(lexicon: &BiasLexicon, doc: &Document, scope: Scope) -> BTreeSet<String> {
    match scope {
        Scope::IdentityScoped => applicable_terms(lexicon, &doc.key.identity),
        Scope::AllTerms => lexicon.lemmas(),
    }
}

pub fn bias_score(
    doc: &Document,
    corpus: &Corpus,
    lexicon: &BiasLexicon,
    scope: Scope,
) -> Result<ScoreCell, ScoringError> {
    let terms = scoped_terms(lexicon, doc, scope);
    let mut per_term = BTreeMap::new();
    for t in doc.distinct_terms() {
        if terms.contains(t) {
            per_term.insert(t.to_string(), bias_tfidf(t, doc, corpus)?);
        }
    }
    Ok(ScoreCell::from_terms(doc.key, per_term))
}

pub fn top_overall_term(doc: &Document, corpus: &Corpus) -> Result<Option<ScoredTerm>, ScoringError> {
    let mut values = Vec::new();
    for t in doc.distinct_terms() {
        values.push((t, overall_tfidf(t, doc, corpus)?));
    }
    Ok(argmax(values))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverallCell {
    pub key: DocumentKey,
    pub top_term: Option<ScoredTerm>,
}

/// Scores every document, in key order.
pub fn score_corpus(
    corpus: &Corpus,
    lexicon: &BiasLexicon,
    scope: Scope,
) -> Result<Vec<ScoreCell>, ScoringError> {
    let docs: Vec<&Document> = corpus.documents().collect();
    docs.par_iter()
        .map(|d| bias_score(d, corpus, lexicon, scope))
        .collect()
}

pub fn overall_corpus(corpus: &Corpus) -> Result<Vec<OverallCell>, ScoringError> {
    let docs: Vec<&Document> = corpus.documents().collect();
    docs.par_iter()
        .map(|d| {
            Ok(OverallCell {
                key: d.key,
                top_term: top_overall_term(d, corpus)?,
            })
        })
        .collect()
}
