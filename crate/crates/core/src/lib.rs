//! Intersectional bias evaluation for multilingual text generation.
//!
//! The crate renders a matrix of identity-conditioned prompts, collects
//! generations through a [`genclient::Backend`], preprocesses the English
//! translations into per-identity documents and scores them with a
//! TF-IDF weighting restricted to an identity-scoped bias lexicon.

pub mod aggregate;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod genclient;
pub mod identity;
pub mod lexicon;
pub mod pipeline;
pub mod report;
pub mod scoring;
pub mod text;

use thiserror::Error;

/// Any failure surfaced by the command-line tool.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Prompt(#[from] identity::PromptError),
    #[error(transparent)]
    Parse(#[from] identity::ParseEnumError),
    #[error(transparent)]
    Lexicon(#[from] lexicon::LexiconError),
    #[error(transparent)]
    Corpus(#[from] corpus::CorpusError),
    #[error(transparent)]
    Scoring(#[from] scoring::ScoringError),
    #[error(transparent)]
    Aggregate(#[from] aggregate::AggregateError),
    #[error(transparent)]
    Report(#[from] report::ReportError),
    #[error(transparent)]
    Generation(#[from] genclient::GenError),
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error("{0}")]
    Invalid(String),
    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        source: Box<Error>,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.as_ref().display().to_string();
        move |source| Error::Io { path, source }
    }

    /// Process exit status: 1 for invalid input, 2 for backend failures,
    /// 3 for file system errors.
    pub fn exit_code(&self) -> i32 {
        use genclient::GenError as G;
        match self {
            Error::Stage { source, .. } => source.exit_code(),
            Error::Io { .. } => 3,
            Error::Corpus(corpus::CorpusError::Io { .. }) => 3,
            Error::Lexicon(lexicon::LexiconError::Io(_)) => 3,
            Error::Config(config::ConfigError::Io { .. } | config::ConfigError::MissingPath(_)) => 3,
            Error::Generation(G::BackendUnavailable(_) | G::MalformedResponse(_)) => 2,
            Error::Generation(G::Io { .. }) => 3,
            _ => 1,
        }
    }

    /// Short machine-readable category used in diagnostics.
    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            2 => "backend",
            3 => "io",
            _ => "validation",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
