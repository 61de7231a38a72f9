//! Command-line interface.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::aggregate::{series, series_csv, AggregateError, ApplicationFilter, Axis};
use crate::config::{DetectorKind, RunConfig};
use crate::corpus::{read_corpus_dir, read_records, write_corpus_dir, GenerationRecord};
use crate::genclient::{record_id, run_matrix, JsonlSink, RunOptions};
use crate::identity::{
    enumerate_identities, render_application_prompt, render_debias_prompt, Application,
    ApplicationKind, Language, PromptMethod,
};
use crate::lexicon::{expand_lexicon, seed_lexicon, validate_lexicon, TableSimilarity, TableSynonyms};
use crate::pipeline::{
    detector, ingest, load_lexicon_file, load_stopwords, pipeline_run, read_jsonl, save_lexicon,
    score_all, write_file, write_json, write_jsonl,
};
use crate::report::{build_report, render_table, Format, ReportKind};
use crate::scoring::{OverallCell, ScoreCell, Scope};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "ibias", version, about = "Intersectional bias evaluation toolkit")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Suppress progress output.
    #[arg(long, global = true)]
    pub quiet: bool,
    /// Seed for the stub backend, overriding the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Prompt rendering.
    #[command(subcommand)]
    Prompts(PromptsCmd),
    /// Bias lexicon utilities.
    #[command(subcommand)]
    Lexicon(LexiconCmd),
    /// Generation against the configured backend.
    #[command(subcommand)]
    Generate(GenerateCmd),
    /// Clean generation records and build corpora.
    Ingest(IngestArgs),
    /// Compute bias scores and overall top terms.
    Score(ScoreArgs),
    /// Average bias scores along an axis.
    Aggregate(AggregateArgs),
    /// Render a binned table.
    Report(ReportArgs),
    /// Run every stage from a configuration file.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Subcommand)]
pub enum PromptsCmd {
    /// Write the prompt matrix as JSON Lines.
    Emit(EmitArgs),
}

#[derive(Debug, Args)]
pub struct EmitArgs {
    #[arg(long)]
    pub language: Language,
    #[arg(long, value_delimiter = ',', default_value = "original")]
    pub methods: Vec<PromptMethod>,
    /// Generation records holding the originals that debiasing prompts embed.
    #[arg(long)]
    pub sources: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum LexiconCmd {
    /// Check a lexicon CSV for structural problems.
    Validate { path: PathBuf },
    /// Add synonyms that pass the similarity threshold.
    Expand {
        path: PathBuf,
        #[arg(long, default_value_t = crate::lexicon::DEFAULT_SIMILARITY_THRESHOLD)]
        threshold: f64,
        /// CSV with columns `lemma,synonym`.
        #[arg(long)]
        synonyms: PathBuf,
        /// CSV with columns `a,b,score`.
        #[arg(long)]
        similarity: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the built-in seed lexicon.
    Seed {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum GenerateCmd {
    /// Generate, debias and translate the prompt matrix.
    Run(GenerateArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_delimiter = ',')]
    pub languages: Vec<Language>,
    #[arg(long, value_delimiter = ',')]
    pub methods: Vec<PromptMethod>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "stub")]
    pub detector: DetectorArg,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum DetectorArg {
    Stub,
    None,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub lexicon: PathBuf,
    #[arg(long, default_value = "identity")]
    pub scope: Scope,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write overall top terms here.
    #[arg(long)]
    pub overall_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub axis: Axis,
    #[arg(long, default_value = "all")]
    pub application: ApplicationFilter,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub overall: Option<PathBuf>,
    #[arg(long)]
    pub language: Language,
    #[arg(long)]
    pub application: ApplicationKind,
    #[arg(long)]
    pub method: PromptMethod,
    #[arg(long, default_value = "csv")]
    pub format: Format,
    #[arg(long, default_value = "bias")]
    pub kind: ReportKind,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Overrides `paths.out_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct Diagnostic<'a> {
    level: &'a str,
    kind: &'a str,
    exit_code: i32,
    message: String,
}

/// Parses arguments, runs the command and returns the process exit status.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            let code = e.exit_code();
            let diag = Diagnostic {
                level: "error",
                kind: e.kind(),
                exit_code: code,
                message: e.to_string(),
            };
            eprintln!("{}", serde_json::to_string(&diag).expect("diagnostic serializes"));
            code
        }
    }
}

fn info(cli: &Cli, message: impl AsRef<str>) {
    if !cli.quiet {
        eprintln!("{}", message.as_ref());
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.backend.seed = seed;
    }
    Ok(config)
}

fn require_dir(path: &Path) -> Result<()> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(Error::Io {
            path: path.display().to_string(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "directory not found"),
        })
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Prompts(PromptsCmd::Emit(a)) => emit_prompts(cli, a),
        Command::Lexicon(cmd) => lexicon_cmd(cli, cmd),
        Command::Generate(GenerateCmd::Run(a)) => generate(cli, a),
        Command::Ingest(a) => {
            let records = read_records(&a.input)?;
            let stopwords = load_stopwords(a.stopwords.as_deref())?;
            let kind = match a.detector {
                DetectorArg::Stub => DetectorKind::Stub,
                DetectorArg::None => DetectorKind::None,
            };
            let (corpora, summary) = ingest(records, detector(kind).as_ref(), &stopwords);
            write_corpus_dir(&a.out, &corpora, &summary)?;
            info(
                cli,
                format!(
                    "kept {} of {} records in {} corpora",
                    summary.kept,
                    summary.input,
                    corpora.len()
                ),
            );
            Ok(())
        }
        Command::Score(a) => {
            require_dir(&a.corpus)?;
            let corpora = read_corpus_dir(&a.corpus)?;
            let lexicon = load_lexicon_file(&a.lexicon)?;
            let (scores, overall) = score_all(&corpora, &lexicon, a.scope)?;
            write_jsonl(&a.out, &scores)?;
            if let Some(p) = &a.overall_out {
                write_jsonl(p, &overall)?;
            }
            info(cli, format!("scored {} documents", scores.len()));
            Ok(())
        }
        Command::Aggregate(a) => {
            let cells: Vec<ScoreCell> = read_jsonl(&a.scores)?;
            let results = series(&cells, a.axis, a.application);
            if results.is_empty() {
                return Err(AggregateError::NoMatchingCells(format!(
                    "axis {} for application {}",
                    a.axis.name(),
                    a.application.label()
                ))
                .into());
            }
            write_file(&a.out, series_csv(&results).as_bytes())
        }
        Command::Report(a) => report(a),
        Command::Pipeline(a) => {
            if cli.config.is_none() {
                return Err(Error::Invalid("pipeline requires --config".into()));
            }
            let mut config = load_config(cli)?;
            if let Some(out) = &a.out {
                config.paths.out_dir = out.clone();
            }
            let summary = pipeline_run(&config)?;
            info(
                cli,
                format!(
                    "{} documents, {} score cells, {} reports in {}",
                    summary.documents,
                    summary.score_cells,
                    summary.reports,
                    config.paths.out_dir.display()
                ),
            );
            if let Some(run) = summary.generation.as_ref().filter(|r| !r.failures.is_empty()) {
                return Err(Error::Generation(crate::genclient::GenError::BackendUnavailable(
                    format!("{} cells failed; see run_summary.json", run.failures.len()),
                )));
            }
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct PromptLine<'a> {
    language: Language,
    family: crate::identity::LanguageFamily,
    religion: crate::identity::Religion,
    gender: crate::identity::Gender,
    marital_status: crate::identity::MaritalStatus,
    children: crate::identity::Children,
    application: ApplicationKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    story_location: Option<crate::identity::StoryLocation>,
    method: PromptMethod,
    prompt_text: &'a str,
}

fn emit_prompts(cli: &Cli, a: &EmitArgs) -> Result<()> {
    let sources: Option<std::collections::HashMap<String, GenerationRecord>> = match &a.sources {
        Some(p) => Some(
            read_records(p)?
                .into_iter()
                .map(|r| (r.record_id.clone(), r))
                .collect(),
        ),
        None => None,
    };
    if a.methods.iter().any(|m| m.is_debias()) && sources.is_none() {
        return Err(Error::Invalid(
            "debiasing prompts need --sources with the original generations".into(),
        ));
    }
    let mut out = Vec::new();
    let mut count = 0usize;
    for &method in &a.methods {
        for identity in enumerate_identities() {
            for app in Application::all() {
                let text = if method.is_debias() {
                    let id = record_id(a.language, PromptMethod::Original, &identity, &app);
                    let original = sources
                        .as_ref()
                        .and_then(|s| s.get(&id))
                        .ok_or_else(|| Error::Invalid(format!("no original record `{id}` in sources")))?;
                    render_debias_prompt(method, &original.raw_output)?
                } else {
                    render_application_prompt(&identity, &app, a.language)?
                };
                let line = PromptLine {
                    language: a.language,
                    family: a.language.family(),
                    religion: identity.religion,
                    gender: identity.gender,
                    marital_status: identity.marital_status,
                    children: identity.children,
                    application: app.kind,
                    story_location: app.story_location,
                    method,
                    prompt_text: &text,
                };
                serde_json::to_writer(&mut out, &line).expect("prompt serializes");
                out.push(b'\n');
                count += 1;
            }
        }
    }
    write_file(&a.out, &out)?;
    info(cli, format!("wrote {count} prompts"));
    Ok(())
}

fn lexicon_cmd(cli: &Cli, cmd: &LexiconCmd) -> Result<()> {
    match cmd {
        LexiconCmd::Validate { path } => {
            let lexicon = load_lexicon_file(path)?;
            let violations = validate_lexicon(&lexicon);
            let mut stdout = std::io::stdout().lock();
            for v in &violations {
                let _ = writeln!(stdout, "{v}");
            }
            if violations.is_empty() {
                info(cli, format!("{}: {} entries, valid", path.display(), lexicon.len()));
                Ok(())
            } else {
                Err(Error::Invalid(format!(
                    "{}: {} violations",
                    path.display(),
                    violations.len()
                )))
            }
        }
        LexiconCmd::Expand {
            path,
            threshold,
            synonyms,
            similarity,
            out,
        } => {
            let lexicon = load_lexicon_file(path)?;
            let syn = TableSynonyms::from_csv(fs::File::open(synonyms).map_err(Error::io(synonyms))?)?;
            let sim =
                TableSimilarity::from_csv(fs::File::open(similarity).map_err(Error::io(similarity))?)?;
            let expanded = expand_lexicon(&lexicon, &syn, &sim, *threshold)?;
            save_lexicon(out, &expanded)?;
            info(
                cli,
                format!("{} entries ({} added)", expanded.len(), expanded.len() - lexicon.len()),
            );
            Ok(())
        }
        LexiconCmd::Seed { out } => save_lexicon(out, &seed_lexicon()),
    }
}

fn generate(cli: &Cli, a: &GenerateArgs) -> Result<()> {
    let mut config = load_config(cli)?;
    if !a.languages.is_empty() {
        config.languages = a.languages.clone();
    }
    if !a.methods.is_empty() {
        config.methods = a.methods.clone();
    }
    if let Some(out) = &a.out {
        config.paths.out_dir = out.clone();
    }
    config.validate()?;
    let backend = config.backend.build()?;
    let out = &config.paths.out_dir;
    let mut sink = JsonlSink::open(&out.join("records.jsonl"))?;
    let summary = run_matrix(
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
    write_json(&out.join("run_summary.json"), &summary)?;
    info(
        cli,
        format!(
            "generated {}, resumed {}, failed {}",
            summary.generated,
            summary.resumed,
            summary.failures.len()
        ),
    );
    match summary.failures.first() {
        Some(first) => Err(Error::Generation(crate::genclient::GenError::BackendUnavailable(
            format!(
                "{} cells failed, first `{}`: {}",
                summary.failures.len(),
                first.record_id,
                first.error
            ),
        ))),
        None => Ok(()),
    }
}

fn report(a: &ReportArgs) -> Result<()> {
    let scores: Vec<ScoreCell> = read_jsonl(&a.scores)?;
    let overall: Vec<OverallCell> = match &a.overall {
        Some(p) => read_jsonl(p)?,
        None if a.kind == ReportKind::Overall => {
            return Err(Error::Invalid("--kind overall needs --overall".into()))
        }
        None => Vec::new(),
    };
    let in_slice = |k: &crate::corpus::DocumentKey| {
        k.language == a.language && k.method == a.method && k.application == a.application
    };
    let present = match a.kind {
        ReportKind::Bias => scores.iter().any(|c| in_slice(&c.key)),
        ReportKind::Overall => overall.iter().any(|c| in_slice(&c.key)),
    };
    if !present {
        return Err(AggregateError::NoMatchingCells(format!(
            "{} {} {}",
            a.language,
            a.method.label(),
            a.application
        ))
        .into());
    }
    let table = build_report(&scores, &overall, a.language, a.application, a.method, a.kind);
    write_file(&a.out, &render_table(&table, a.format))
}
