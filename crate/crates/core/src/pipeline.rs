//! Stage helpers and the end-to-end run.
//!
//! Output layout under `out_dir`:
//!
//! ```text
//! records.jsonl          generation records
//! run_summary.json       generation counts and failures
//! corpus/                one corpus file per language and method
//! lexicon.csv            the lexicon used for scoring
//! scores.jsonl           bias score cells
//! overall.jsonl          overall top terms
//! averages/<axis>.csv    averaged bias scores
//! reports/               binned tables
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::aggregate::{series, series_csv, ApplicationFilter, Axis};
use crate::config::{DetectorKind, RunConfig};
use crate::corpus::{
    build_corpus, clean_records, read_records, write_corpus_dir, AcceptAll, CleaningSummary,
    Corpus, GenerationRecord, LanguageDetector, ScriptDetector,
};
use crate::genclient::{run_matrix, JsonlSink, RunOptions, RunSummary};
use crate::identity::{ApplicationKind, Language, PromptMethod};
use crate::lexicon::{
    expand_lexicon, load_lexicon, seed_lexicon, write_lexicon, BiasLexicon, TableSimilarity,
    TableSynonyms,
};
use crate::report::{build_report, render_table, Format, ReportKind};
use crate::scoring::{overall_corpus, score_corpus, OverallCell, ScoreCell, Scope};
use crate::text::{default_stopwords, parse_stopwords, RuleLemmatizer};
use crate::{Error, Result};

pub type Corpora = BTreeMap<(Language, PromptMethod), Corpus>;

pub fn load_stopwords(path: Option<&Path>) -> Result<BTreeSet<String>> {
    match path {
        None => Ok(default_stopwords()),
        Some(p) => Ok(parse_stopwords(&fs::read_to_string(p).map_err(Error::io(p))?)),
    }
}

pub fn detector(kind: DetectorKind) -> Box<dyn LanguageDetector> {
    match kind {
        DetectorKind::Stub => Box::new(ScriptDetector),
        DetectorKind::None => Box::new(AcceptAll),
    }
}

pub fn load_lexicon_file(path: &Path) -> Result<BiasLexicon> {
    let file = fs::File::open(path).map_err(Error::io(path))?;
    Ok(load_lexicon(file)?)
}

pub fn save_lexicon(path: &Path, lexicon: &BiasLexicon) -> Result<()> {
    let mut buf = Vec::new();
    write_lexicon(lexicon, &mut buf)?;
    write_file(path, &buf)
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(Error::io(parent))?;
    }
    fs::write(path, bytes).map_err(Error::io(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    write_file(path, text.as_bytes())
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(Error::io(parent))?;
    }
    let mut w = BufWriter::new(fs::File::create(path).map_err(Error::io(path))?);
    for item in items {
        serde_json::to_writer(&mut w, item).expect("item serializes");
        w.write_all(b"\n").map_err(Error::io(path))?;
    }
    w.flush().map_err(Error::io(path))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path).map_err(Error::io(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(Error::io(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| {
            Error::Invalid(format!("{}: line {}: {e}", path.display(), i + 1))
        })?);
    }
    Ok(out)
}

/// Cleans records and assembles corpora with the rule lemmatizer.
pub fn ingest(
    records: Vec<GenerationRecord>,
    detector: &dyn LanguageDetector,
    stopwords: &BTreeSet<String>,
) -> (Corpora, CleaningSummary) {
    let (kept, summary) = clean_records(records, detector);
    (build_corpus(&kept, &RuleLemmatizer, stopwords), summary)
}

/// Scores every corpus. Lexicon lemmas pass through the same lemmatizer as
/// the documents before matching.
pub fn score_all(
    corpora: &Corpora,
    lexicon: &BiasLexicon,
    scope: Scope,
) -> Result<(Vec<ScoreCell>, Vec<OverallCell>)> {
    let lexicon = lexicon.lemmatized(&RuleLemmatizer);
    let mut scores = Vec::new();
    let mut overall = Vec::new();
    for corpus in corpora.values() {
        scores.extend(score_corpus(corpus, &lexicon, scope)?);
        overall.extend(overall_corpus(corpus)?);
    }
    Ok((scores, overall))
}

/// All application filters, `All` first.
pub fn application_filters() -> Vec<ApplicationFilter> {
    std::iter::once(ApplicationFilter::All)
        .chain(ApplicationKind::ALL.iter().map(|&k| ApplicationFilter::Kind(k)))
        .collect()
}

/// Writes `<axis>.csv` for every axis, one block per application filter.
pub fn write_averages(dir: &Path, cells: &[ScoreCell]) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for &axis in Axis::ALL {
        let results: Vec<_> = application_filters()
            .into_iter()
            .flat_map(|app| series(cells, axis, app))
            .collect();
        let path = dir.join(format!("{}.csv", axis.name()));
        write_file(&path, series_csv(&results).as_bytes())?;
        written.push(path);
    }
    Ok(written)
}

pub fn application_slug(kind: ApplicationKind) -> &'static str {
    match kind {
        ApplicationKind::TodoList => "todo",
        ApplicationKind::HobbiesValues => "hobbies",
        ApplicationKind::Story => "story",
    }
}

pub fn report_file_name(
    language: Language,
    method: PromptMethod,
    application: ApplicationKind,
    kind: ReportKind,
    format: Format,
) -> String {
    let kind = match kind {
        ReportKind::Bias => "bias",
        ReportKind::Overall => "overall",
    };
    format!(
        "{}_{}_{}_{kind}.{}",
        language.name().to_lowercase(),
        method.label(),
        application_slug(application),
        format.extension()
    )
}

/// Renders every (language, method, application, kind, format) table that
/// has at least one cell.
pub fn write_reports(
    dir: &Path,
    scores: &[ScoreCell],
    overall: &[OverallCell],
    formats: &[Format],
) -> Result<Vec<PathBuf>> {
    let slices: BTreeSet<(Language, PromptMethod, ApplicationKind)> = scores
        .iter()
        .map(|c| (c.key.language, c.key.method, c.key.application))
        .chain(
            overall
                .iter()
                .map(|c| (c.key.language, c.key.method, c.key.application)),
        )
        .collect();
    let mut written = Vec::new();
    for (language, method, application) in slices {
        for kind in [ReportKind::Bias, ReportKind::Overall] {
            let table = build_report(scores, overall, language, application, method, kind);
            for &format in formats {
                let path = dir.join(report_file_name(language, method, application, kind, format));
                write_file(&path, &render_table(&table, format))?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

/// Lexicon named by the config (or the seed), expanded when synonym and
/// similarity tables are configured.
pub fn configured_lexicon(config: &RunConfig) -> Result<BiasLexicon> {
    let base = match &config.paths.lexicon {
        Some(p) => load_lexicon_file(p)?,
        None => seed_lexicon(),
    };
    match (&config.expansion.synonyms, &config.expansion.similarity) {
        (Some(syn), Some(sim)) => {
            let synonyms = TableSynonyms::from_csv(fs::File::open(syn).map_err(Error::io(syn))?)?;
            let similarity =
                TableSimilarity::from_csv(fs::File::open(sim).map_err(Error::io(sim))?)?;
            Ok(expand_lexicon(&base, &synonyms, &similarity, config.expansion.threshold)?)
        }
        _ => Ok(base),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineSummary {
    pub generation: Option<RunSummary>,
    pub cleaning: CleaningSummary,
    pub documents: usize,
    pub lexicon_entries: usize,
    pub score_cells: usize,
    pub reports: usize,
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Stage {
        stage: name,
        source: Box::new(e),
    })
}

/// Runs generate → ingest → score → aggregate → report.
///
/// When `paths.records` is set, generation is skipped and those records
/// are used instead. Backend failures on individual cells are reported in
/// `run_summary.json` and the remaining stages proceed on what was stored.
pub fn pipeline_run(config: &RunConfig) -> Result<PipelineSummary> {
    stage("config", config.validate().map_err(Error::from))?;
    let out = &config.paths.out_dir;
    fs::create_dir_all(out).map_err(Error::io(out))?;
    let mut summary = PipelineSummary::default();

    let records = stage("generate", (|| -> Result<Vec<GenerationRecord>> {
        if let Some(path) = &config.paths.records {
            return Ok(read_records(path)?);
        }
        let backend = config.backend.build()?;
        let mut sink = JsonlSink::open(&out.join("records.jsonl"))?;
        let run = run_matrix(
            &config.languages,
            &config.methods,
            backend.as_ref(),
            &config.generation,
            &config.translation,
            &mut sink,
            &RunOptions {
                concurrency: config.backend.concurrency,
            },
        )?;
        write_json(&out.join("run_summary.json"), &run)?;
        summary.generation = Some(run);
        let mut records = sink.records().to_vec();
        records.sort_by(|a, b| a.record_id.cmp(&b.record_id));
        Ok(records)
    })())?;

    let corpora = stage("ingest", (|| {
        let stopwords = load_stopwords(config.paths.stopwords.as_deref())?;
        let (corpora, cleaning) = ingest(records, detector(config.detector).as_ref(), &stopwords);
        write_corpus_dir(&out.join("corpus"), &corpora, &cleaning)?;
        summary.cleaning = cleaning;
        summary.documents = corpora.values().map(Corpus::n).sum();
        Ok(corpora)
    })())?;

    let (scores, overall) = stage("score", (|| {
        let lexicon = configured_lexicon(config)?;
        save_lexicon(&out.join("lexicon.csv"), &lexicon)?;
        summary.lexicon_entries = lexicon.len();
        let (scores, overall) = score_all(&corpora, &lexicon, config.scope)?;
        write_jsonl(&out.join("scores.jsonl"), &scores)?;
        write_jsonl(&out.join("overall.jsonl"), &overall)?;
        summary.score_cells = scores.len();
        Ok((scores, overall))
    })())?;

    stage("aggregate", write_averages(&out.join("averages"), &scores))?;
    let reports = stage(
        "report",
        write_reports(&out.join("reports"), &scores, &overall, &config.formats),
    )?;
    summary.reports = reports.len();
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(out: &Path) -> RunConfig {
        RunConfig {
            languages: vec![Language::Marathi],
            formats: vec![Format::Csv, Format::Markdown],
            paths: crate::config::PathsConfig {
                out_dir: out.to_path_buf(),
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn run_writes_every_stage() {
        let dir = tempfile::tempdir().unwrap();
        let s = pipeline_run(&config(dir.path())).unwrap();
        assert_eq!(s.generation.as_ref().unwrap().generated, 864);
        assert_eq!(s.documents, 3 * 144);
        assert_eq!(s.score_cells, 3 * 144);
        // 3 methods x 3 applications x 2 kinds x 2 formats
        assert_eq!(s.reports, 36);
        for f in ["records.jsonl", "scores.jsonl", "overall.jsonl", "lexicon.csv", "averages/gender.csv"] {
            assert!(dir.path().join(f).is_file(), "{f}");
        }
        assert!(dir
            .path()
            .join("reports/marathi_complex_story_bias.md")
            .is_file());
    }

    #[test]
    fn invalid_config_stops_before_output() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = config(&dir.path().join("o"));
        c.expansion.threshold = -0.1;
        let err = pipeline_run(&c).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(!dir.path().join("o").exists());
    }
}
