#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

use intersect_bias::aggregate::{
    average_by_subdimension, ApplicationFilter, AverageQuery, FamilyFilter, SubDimension,
};
use intersect_bias::corpus::{Corpus, Document, DocumentKey};
use intersect_bias::identity::{
    enumerate_identities, ApplicationKind, Children, Gender, Identity, Language, MaritalStatus,
    PromptMethod, Religion,
};
use intersect_bias::lexicon::{
    expand_lexicon, BiasLexicon, BiasTerm, IdentitySelector, Provenance, TableSimilarity,
    TableSynonyms,
};
use intersect_bias::report::{bin_column, BinClass};
use intersect_bias::scoring::{
    bias_df, bias_idf, bias_score, bias_tf, bias_tfidf, idf_from_counts, overall_tfidf, ScoreCell,
    Scope,
};

pub const PROPERTY_CASES: u32 = 1_000;

pub const VOCAB: &[&str] = &[
    "house", "lonely", "strict", "rude", "tea", "market", "care", "family", "walk", "pray",
];

pub fn key(identity: Identity) -> DocumentKey {
    DocumentKey {
        language: Language::Hindi,
        method: PromptMethod::Original,
        identity,
        application: ApplicationKind::TodoList,
    }
}

/// Up to five documents of up to twenty tokens each over a small vocabulary.
pub fn toy_corpus() -> impl Strategy<Value = Vec<Vec<String>>> {
    prop::collection::vec(
        prop::collection::vec(prop::sample::select(VOCAB).prop_map(String::from), 0..=20),
        1..=5,
    )
}

pub fn corpus_of(docs: &[Vec<String>]) -> Corpus {
    let ids = enumerate_identities();
    Corpus::new(
        docs.iter()
            .enumerate()
            .map(|(i, tokens)| Document::new(key(ids[i * 7 % 48]), tokens.clone())),
    )
}

pub mod oracle {
    //! Direct transcriptions of the weighting formulas over raw token lists.

    pub fn tf(term: &str, doc: &[String]) -> f64 {
        if doc.is_empty() {
            return 0.0;
        }
        let mut count = 0usize;
        for t in doc {
            if t == term {
                count += 1;
            }
        }
        count as f64 / doc.len() as f64
    }

    pub fn df(term: &str, docs: &[Vec<String>]) -> usize {
        let mut n = 0;
        for d in docs {
            let mut found = false;
            for t in d {
                if t == term {
                    found = true;
                }
            }
            if found {
                n += 1;
            }
        }
        n
    }

    pub fn idf(term: &str, docs: &[Vec<String>]) -> f64 {
        let n = docs.len() as f64;
        let df = df(term, docs) as f64;
        ((n + 1.0) / (df + 1.0)).ln() + 1.0
    }

    pub fn tfidf(term: &str, doc: &[String], docs: &[Vec<String>]) -> f64 {
        tf(term, doc) * idf(term, docs)
    }
}

/// Checks every scoring function against the oracle on `trials` random
/// corpora, returning the largest absolute deviation seen.
pub fn oracle_equivalence(trials: u32) -> Result<f64, String> {
    let mut runner = TestRunner::new(Config {
        cases: trials,
        failure_persistence: None,
        ..Config::default()
    });
    let worst = std::cell::Cell::new(0.0f64);
    runner
        .run(&toy_corpus(), |docs| {
            let corpus = corpus_of(&docs);
            let ids = enumerate_identities();
            for (i, raw) in docs.iter().enumerate() {
                let doc = corpus.get(&key(ids[i * 7 % 48])).expect("document present");
                for &term in VOCAB.iter().chain(["absent"].iter()) {
                    let pairs = [
                        (bias_tf(term, doc), oracle::tf(term, raw)),
                        (bias_df(term, &corpus) as f64, oracle::df(term, &docs) as f64),
                        (bias_idf(term, &corpus).unwrap(), oracle::idf(term, &docs)),
                        (bias_tfidf(term, doc, &corpus).unwrap(), oracle::tfidf(term, raw, &docs)),
                        (overall_tfidf(term, doc, &corpus).unwrap(), oracle::tfidf(term, raw, &docs)),
                    ];
                    for (got, want) in pairs {
                        let err = (got - want).abs();
                        worst.set(worst.get().max(err));
                        prop_assert!(err < 1e-9, "{term}: got {got}, oracle {want}");
                    }
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(worst.get())
}

fn runner() -> TestRunner {
    TestRunner::new(Config {
        cases: PROPERTY_CASES,
        failure_persistence: None,
        ..Config::default()
    })
}

pub fn prop_idf_monotone() -> Result<(), String> {
    runner()
        .run(&(1usize..5_000, 0usize..5_000, 0usize..5_000), |(n, a, b)| {
            let (lo, hi) = (a.min(b) % (n + 1), a.max(b) % (n + 1));
            let (lo, hi) = (lo.min(hi), lo.max(hi));
            prop_assert!(idf_from_counts(n, lo) >= idf_from_counts(n, hi));
            prop_assert!(idf_from_counts(n, hi) >= 1.0);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn prop_tf_unit_interval() -> Result<(), String> {
    runner()
        .run(&toy_corpus(), |docs| {
            let corpus = corpus_of(&docs);
            for doc in corpus.documents() {
                for term in VOCAB {
                    let tf = bias_tf(term, doc);
                    prop_assert!((0.0..=1.0).contains(&tf));
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn selector() -> impl Strategy<Value = IdentitySelector> {
    (
        prop::option::of(prop::sample::subsequence(Religion::ALL.to_vec(), 1..=2)),
        prop::option::of(prop::sample::subsequence(Gender::ALL.to_vec(), 1..=2)),
        prop::option::of(prop::sample::subsequence(MaritalStatus::ALL.to_vec(), 1..=4)),
        prop::option::of(prop::sample::subsequence(Children::ALL.to_vec(), 1..=3)),
    )
        .prop_map(|(r, g, m, c)| {
            let mut s = IdentitySelector::default();
            if let Some(r) = r {
                s = s.religion(r);
            }
            if let Some(g) = g {
                s = s.gender(g);
            }
            if let Some(m) = m {
                s = s.marital_status(m);
            }
            if let Some(c) = c {
                s = s.children(c);
            }
            s
        })
        .prop_filter("a lexicon selector constrains at least one dimension", |s| {
            !s.is_wildcard()
        })
}

fn lexicon() -> impl Strategy<Value = BiasLexicon> {
    prop::collection::btree_map(prop::sample::select(VOCAB), selector(), 1..=VOCAB.len()).prop_map(
        |m| {
            BiasLexicon::from_entries(
                m.into_iter()
                    .map(|(lemma, selector)| BiasTerm {
                        lemma: lemma.to_string(),
                        selector,
                        provenance: Provenance::Literature,
                        source_note: "test".into(),
                    })
                    .collect(),
            )
            .expect("distinct lemmas")
        },
    )
}

pub fn prop_scoped_le_all() -> Result<(), String> {
    runner()
        .run(&(toy_corpus(), lexicon()), |(docs, lex)| {
            let corpus = corpus_of(&docs);
            for doc in corpus.documents() {
                let scoped = bias_score(doc, &corpus, &lex, Scope::IdentityScoped).unwrap();
                let all = bias_score(doc, &corpus, &lex, Scope::AllTerms).unwrap();
                prop_assert!(scoped.bias_score <= all.bias_score + 1e-12);
                prop_assert!(scoped.per_term.keys().all(|k| all.per_term.contains_key(k)));
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

const CANDIDATES: &[&str] = &["abode", "solitary", "harsh", "impolite", "kin", "dwelling", "Stern", "two words"];

type SynonymRows = Vec<(usize, usize)>;
type SimilarityRows = Vec<(usize, usize, f64)>;

fn expansion_tables() -> impl Strategy<Value = (SynonymRows, SimilarityRows)> {
    (
        prop::collection::vec((0..VOCAB.len(), 0..CANDIDATES.len()), 0..20),
        prop::collection::vec((0..VOCAB.len(), 0..CANDIDATES.len(), -1.0f64..=1.0), 0..20),
    )
}

fn build_tables(
    syn: &[(usize, usize)],
    sim: &[(usize, usize, f64)],
) -> (TableSynonyms, TableSimilarity) {
    let mut s = TableSynonyms::default();
    for &(a, b) in syn {
        s.insert(VOCAB[a], CANDIDATES[b]);
    }
    let mut t = TableSimilarity::default();
    for &(a, b, score) in sim {
        t.insert(VOCAB[a], &CANDIDATES[b].to_lowercase(), score);
    }
    (s, t)
}

fn pairs(lex: &BiasLexicon) -> BTreeSet<(String, IdentitySelector)> {
    lex.entries()
        .iter()
        .map(|e| (e.lemma.clone(), e.selector.clone()))
        .collect()
}

pub fn prop_expansion() -> Result<(), String> {
    runner()
        .run(
            &(lexicon(), expansion_tables(), 0.0f64..=1.0, 0.0f64..=1.0),
            |(lex, (syn, sim), t1, t2)| {
                let (lo, hi) = (t1.min(t2), t1.max(t2));
                let (s, t) = build_tables(&syn, &sim);
                let low = expand_lexicon(&lex, &s, &t, lo).unwrap();
                let high = expand_lexicon(&lex, &s, &t, hi).unwrap();
                // superset of the input, entries preserved verbatim and in order
                prop_assert_eq!(&low.entries()[..lex.len()], lex.entries());
                prop_assert_eq!(&high.entries()[..lex.len()], lex.entries());
                // raising the threshold only removes additions
                prop_assert!(pairs(&high).is_subset(&pairs(&low)));
                // replay: filtering the low expansion at the high threshold
                // reproduces the high expansion
                let replayed: BTreeSet<_> = low.entries()[lex.len()..]
                    .iter()
                    .filter(|e| {
                        use intersect_bias::lexicon::SimilarityOracle;
                        t.similarity(&e.source_note, &e.lemma).unwrap() >= hi
                    })
                    .map(|e| (e.lemma.clone(), e.selector.clone()))
                    .chain(pairs(&lex))
                    .collect();
                prop_assert_eq!(replayed, pairs(&high));
                // re-expanding keeps every existing pair
                let again = expand_lexicon(&low, &s, &t, lo).unwrap();
                prop_assert!(pairs(&low).is_subset(&pairs(&again)));
                Ok(())
            },
        )
        .map_err(|e| e.to_string())
}

fn classify(v: f64, mean: f64, sd: f64) -> BinClass {
    if sd == 0.0 {
        BinClass::Mid
    } else if v >= mean + sd {
        BinClass::High
    } else if v <= mean - sd {
        BinClass::Low
    } else {
        BinClass::Mid
    }
}

pub fn prop_binning_affine() -> Result<(), String> {
    let column = prop::collection::vec(prop::option::weighted(0.9, -100.0f64..100.0), 1..60);
    runner()
        .run(&(column, 0.01f64..50.0, -100.0f64..100.0), |(values, a, b)| {
            // an all-absent column has no statistics to bin against
            let Ok(bins) = bin_column(&values) else { return Ok(()) };
            let scaled: Vec<Option<f64>> = values.iter().map(|v| v.map(|x| a * x + b)).collect();
            let scaled_bins = bin_column(&scaled).unwrap();
            let present: Vec<f64> = values.iter().flatten().copied().collect();
            let n = present.len() as f64;
            let mean = present.iter().sum::<f64>() / n;
            let sd = (present.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
            for ((v, b1), b2) in values.iter().zip(&bins).zip(&scaled_bins) {
                prop_assert_eq!(v.is_none(), b1.is_none());
                prop_assert_eq!(b1.is_none(), b2.is_none());
                let Some(v) = v else { continue };
                prop_assert_eq!(Some(classify(*v, mean, sd)), *b1);
                // values within rounding distance of a boundary may flip
                let margin = 1e-9 * (1.0 + mean.abs() + sd);
                let near = sd > 0.0
                    && ((v - (mean + sd)).abs() < margin || (v - (mean - sd)).abs() < margin);
                if !near {
                    prop_assert_eq!(b1, b2, "value {} a={} b={}", v, a, b);
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn cells_with(scores: &[f64]) -> Vec<ScoreCell> {
    enumerate_identities()
        .into_iter()
        .zip(scores)
        .map(|(id, &s)| {
            let mut per_term = BTreeMap::new();
            per_term.insert("t".to_string(), s);
            ScoreCell::from_terms(key(id), per_term)
        })
        .collect()
}

fn gender_means(cells: &[ScoreCell]) -> Vec<f64> {
    Gender::ALL
        .iter()
        .map(|&g| {
            average_by_subdimension(
                cells,
                AverageQuery {
                    application: ApplicationFilter::All,
                    method: PromptMethod::Original,
                    family: FamilyFilter::Both,
                    subdimension: Some(SubDimension::Gender(g)),
                },
            )
            .unwrap()
            .mean
        })
        .collect()
}

pub fn prop_average_equivariance() -> Result<(), String> {
    let scores = prop::collection::vec(0.0f64..1.0, 48);
    runner()
        .run(&(scores, 0.01f64..20.0, -5.0f64..5.0), |(scores, a, b)| {
            let base = gender_means(&cells_with(&scores));
            let moved: Vec<f64> = scores.iter().map(|s| a * s + b).collect();
            let after = gender_means(&cells_with(&moved));
            for (x, y) in base.iter().zip(&after) {
                prop_assert!((a * x + b - y).abs() < 1e-9, "{} vs {}", a * x + b, y);
            }
            let argmax = |m: &[f64]| if m[0] >= m[1] { 0 } else { 1 };
            if (base[0] - base[1]).abs() > 1e-9 {
                prop_assert_eq!(argmax(&base), argmax(&after));
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Every property with its name, in reporting order.
pub type Property = fn() -> Result<(), String>;

pub fn properties() -> Vec<(&'static str, Property)> {
    vec![
        ("idf monotone in df", prop_idf_monotone),
        ("tf in [0,1]", prop_tf_unit_interval),
        ("identity-scoped score <= all-terms score", prop_scoped_le_all),
        ("expansion superset and threshold replay", prop_expansion),
        ("binning invariant under positive affine maps", prop_binning_affine),
        ("averages equivariant, argmax sub-dimension invariant", prop_average_equivariance),
    ]
}
