use std::collections::{BTreeMap, BTreeSet};

use intersect_bias::lexicon::{
    expand_lexicon, load_lexicon, seed_lexicon, validate_lexicon, IdentitySelector, Provenance,
    TableSimilarity, TableSynonyms,
};

const TARGET: usize = 923;

/// Letters-only name for an index, so generated synonyms never clash with
/// real lexicon words.
fn made_up(i: usize) -> String {
    let mut s = String::from("zq");
    let mut n = i;
    loop {
        s.push((b'a' + (n % 26) as u8) as char);
        n /= 26;
        if n == 0 {
            break;
        }
    }
    s
}

struct Fixture {
    synonyms: Vec<(String, String)>,
    similarity: Vec<(String, String, f64)>,
}

/// Synonym and similarity tables that admit exactly `TARGET - 342` new
/// (lemma, selector) pairs, mixed with candidates that must be ignored:
/// below-threshold scores, multi-word phrases, the seed itself, upper-case
/// repeats of accepted synonyms and candidates with no similarity row.
fn fixture() -> Fixture {
    let seed = seed_lexicon();
    let mut multiplicity: BTreeMap<&str, usize> = BTreeMap::new();
    for e in seed.entries() {
        *multiplicity.entry(e.lemma.as_str()).or_default() += 1;
    }
    let mut synonyms = Vec::new();
    let mut similarity = Vec::new();
    let mut counter = 0usize;
    let mut added = 0usize;
    let need = TARGET - seed.len();
    'outer: for round in 0.. {
        for (&lemma, &m) in &multiplicity {
            if added == need {
                break 'outer;
            }
            if added + m > need {
                continue;
            }
            let good = made_up(counter);
            counter += 1;
            // alternate exactly-at-threshold and comfortably-above scores
            let score = if (counter + round).is_multiple_of(2) { 0.5 } else { 0.83 };
            synonyms.push((lemma.to_string(), good.clone()));
            similarity.push((lemma.to_string(), good.clone(), score));
            added += m;

            if counter.is_multiple_of(3) {
                let weak = made_up(100_000 + counter);
                synonyms.push((lemma.to_string(), weak.clone()));
                similarity.push((lemma.to_string(), weak, 0.4999));
                synonyms.push((lemma.to_string(), good.to_uppercase()));
            }
            if counter.is_multiple_of(5) {
                synonyms.push((lemma.to_string(), "two words".to_string()));
                synonyms.push((lemma.to_string(), lemma.to_string()));
                synonyms.push((lemma.to_string(), made_up(200_000 + counter)));
            }
        }
    }
    Fixture {
        synonyms,
        similarity,
    }
}

fn tables(f: &Fixture) -> (TableSynonyms, TableSimilarity) {
    let mut syn = TableSynonyms::default();
    for (a, b) in &f.synonyms {
        syn.insert(a, b);
    }
    let mut sim = TableSimilarity::default();
    for (a, b, s) in &f.similarity {
        sim.insert(a, b, *s);
    }
    (syn, sim)
}

/// Independent count: every (synonym, selector) pair reachable from a seed
/// entry whose lowercased, single-token synonym scores at least 0.5.
fn oracle_count(f: &Fixture) -> usize {
    let seed = seed_lexicon();
    let score: BTreeMap<(String, String), f64> = f
        .similarity
        .iter()
        .map(|(a, b, s)| ((a.clone(), b.clone()), *s))
        .collect();
    let mut pairs: BTreeSet<(String, IdentitySelector)> = seed
        .entries()
        .iter()
        .map(|e| (e.lemma.clone(), e.selector.clone()))
        .collect();
    for e in seed.entries() {
        for (a, b) in &f.synonyms {
            if a != &e.lemma {
                continue;
            }
            let b = b.to_lowercase();
            if b.contains(' ') || b == e.lemma {
                continue;
            }
            let s = score.get(&(a.clone(), b.clone())).copied().unwrap_or(0.0);
            if s >= 0.5 {
                pairs.insert((b, e.selector.clone()));
            }
        }
    }
    pairs.len()
}

#[test]
fn fixture_expands_seed_to_923() {
    let f = fixture();
    assert_eq!(oracle_count(&f), TARGET);
    let (syn, sim) = tables(&f);
    let seed = seed_lexicon();
    let expanded = expand_lexicon(&seed, &syn, &sim, 0.5).unwrap();
    assert_eq!(seed.len(), 342);
    assert_eq!(expanded.len(), TARGET);
    assert!(validate_lexicon(&expanded).is_empty());
    let auto: Vec<_> = expanded
        .entries()
        .iter()
        .filter(|e| e.provenance == Provenance::AutoSynonym)
        .collect();
    assert_eq!(auto.len(), TARGET - 342);
    assert!(auto.iter().all(|e| seed.lemmas().contains(&e.source_note)));
}

#[test]
fn stricter_threshold_admits_fewer() {
    let f = fixture();
    let (syn, sim) = tables(&f);
    let seed = seed_lexicon();
    let strict = expand_lexicon(&seed, &syn, &sim, 0.6).unwrap();
    assert!(strict.len() < TARGET);
    assert!(strict.len() > seed.len());
    let none = expand_lexicon(&seed, &syn, &sim, 1.0).unwrap();
    assert_eq!(none.len(), seed.len());
}

#[test]
fn cli_expand_writes_923_rows() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, header: &str, rows: Vec<String>| {
        let path = dir.path().join(name);
        std::fs::write(&path, format!("{header}\n{}\n", rows.join("\n"))).unwrap();
        path
    };
    let syn = write(
        "syn.csv",
        "lemma,synonym",
        f.synonyms.iter().map(|(a, b)| format!("{a},{b}")).collect(),
    );
    let sim = write(
        "sim.csv",
        "a,b,score",
        f.similarity.iter().map(|(a, b, s)| format!("{a},{b},{s}")).collect(),
    );
    let seed = dir.path().join("seed.csv");
    let out = dir.path().join("expanded.csv");
    let run = |args: &[&str]| {
        let mut argv = vec!["ibias", "--quiet"];
        argv.extend_from_slice(args);
        intersect_bias::cli::run_from(argv)
    };
    assert_eq!(run(&["lexicon", "seed", "--out", seed.to_str().unwrap()]), 0);
    assert_eq!(
        run(&[
            "lexicon",
            "expand",
            seed.to_str().unwrap(),
            "--threshold",
            "0.5",
            "--synonyms",
            syn.to_str().unwrap(),
            "--similarity",
            sim.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]),
        0
    );
    let expanded = load_lexicon(std::fs::File::open(&out).unwrap()).unwrap();
    assert_eq!(expanded.len(), TARGET);
    assert_eq!(run(&["lexicon", "validate", out.to_str().unwrap()]), 0);
    assert_eq!(
        run(&[
            "lexicon",
            "expand",
            seed.to_str().unwrap(),
            "--threshold",
            "1.5",
            "--synonyms",
            syn.to_str().unwrap(),
            "--similarity",
            sim.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]),
        1
    );
}
