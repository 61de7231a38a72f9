//! TOML run configuration shared by every subcommand.
//!
//! ```toml
//! languages = ["Hindi", "Tamil"]
//! methods = ["original", "simple", "complex"]
//!
//! [paths]
//! out_dir = "out"
//!
//! [backend]
//! kind = "stub"
//! seed = 42
//! ```
//!
//! Every section and key is optional. Unknown keys are rejected.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::genclient::{
    Backend, GenError, GenerationConfig, HttpBackend, RetryPolicy, StubBackend, TranslationConfig,
};
use crate::identity::{Language, PromptMethod};
use crate::report::Format;
use crate::scoring::Scope;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Syntax { path: String, message: String },
    #[error("referenced path does not exist: {0}")]
    MissingPath(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

impl From<GenError> for ConfigError {
    fn from(e: GenError) -> Self {
        ConfigError::Invalid(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Stub,
    Http,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorKind {
    #[default]
    Stub,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub url: Option<String>,
    pub translate_url: Option<String>,
    /// Name of the environment variable holding a bearer token.
    pub auth_env: Option<String>,
    pub timeout_secs: u64,
    pub seed: u64,
    pub concurrency: usize,
    pub retry: RetryPolicy,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::Stub,
            url: None,
            translate_url: None,
            auth_env: None,
            timeout_secs: 120,
            seed: 0,
            concurrency: 4,
            retry: RetryPolicy::default(),
        }
    }
}

impl BackendConfig {
    pub fn build(&self) -> Result<Box<dyn Backend>, GenError> {
        match self.kind {
            BackendKind::Stub => Ok(Box::new(StubBackend { seed: self.seed })),
            BackendKind::Http => {
                let url = self
                    .url
                    .clone()
                    .ok_or_else(|| GenError::InvalidConfig("backend.url is required for http".into()))?;
                let token = self.auth_env.as_ref().and_then(|v| std::env::var(v).ok());
                Ok(Box::new(HttpBackend::new(
                    url,
                    self.translate_url.clone(),
                    token,
                    Duration::from_secs(self.timeout_secs),
                    self.retry.clone(),
                )?))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    pub out_dir: PathBuf,
    /// Existing generation records; when set, generation is skipped.
    pub records: Option<PathBuf>,
    /// Lexicon CSV; the built-in seed lexicon is used when unset.
    pub lexicon: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            out_dir: PathBuf::from("out"),
            records: None,
            lexicon: None,
            stopwords: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExpansionConfig {
    pub threshold: f64,
    pub synonyms: Option<PathBuf>,
    pub similarity: Option<PathBuf>,
}

impl Default for ExpansionConfig {
    fn default() -> Self {
        ExpansionConfig {
            threshold: crate::lexicon::DEFAULT_SIMILARITY_THRESHOLD,
            synonyms: None,
            similarity: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub languages: Vec<Language>,
    pub methods: Vec<PromptMethod>,
    pub scope: Scope,
    pub detector: DetectorKind,
    pub formats: Vec<Format>,
    pub paths: PathsConfig,
    pub expansion: ExpansionConfig,
    pub backend: BackendConfig,
    pub generation: GenerationConfig,
    pub translation: TranslationConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            languages: Language::ALL.to_vec(),
            methods: PromptMethod::ALL.to_vec(),
            scope: Scope::default(),
            detector: DetectorKind::default(),
            formats: vec![Format::Csv],
            paths: PathsConfig::default(),
            expansion: ExpansionConfig::default(),
            backend: BackendConfig::default(),
            generation: GenerationConfig::default(),
            translation: TranslationConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Syntax {
            path: origin.to_string(),
            message: e.message().to_string(),
        })
    }

    /// Reads a config file. Relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut config = Self::parse(&text, &path.display().to_string())?;
        if let Some(base) = path.parent() {
            config.rebase(base);
        }
        Ok(config)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.paths.out_dir);
        for p in [
            &mut self.paths.records,
            &mut self.paths.lexicon,
            &mut self.paths.stopwords,
            &mut self.expansion.synonyms,
            &mut self.expansion.similarity,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    /// Checks value ranges and that every referenced input file exists.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.languages.is_empty() {
            return Err(ConfigError::Invalid("languages must not be empty".into()));
        }
        if self.methods.is_empty() {
            return Err(ConfigError::Invalid("methods must not be empty".into()));
        }
        if self.formats.is_empty() {
            return Err(ConfigError::Invalid("formats must not be empty".into()));
        }
        let t = self.expansion.threshold;
        if !(0.0..=1.0).contains(&t) {
            return Err(ConfigError::Invalid(format!(
                "expansion.threshold must be in [0, 1], got {t}"
            )));
        }
        if self.expansion.synonyms.is_some() != self.expansion.similarity.is_some() {
            return Err(ConfigError::Invalid(
                "expansion.synonyms and expansion.similarity must be given together".into(),
            ));
        }
        if self.backend.concurrency == 0 {
            return Err(ConfigError::Invalid("backend.concurrency must be >= 1".into()));
        }
        if self.backend.kind == BackendKind::Http && self.backend.url.is_none() {
            return Err(ConfigError::Invalid("backend.url is required for http".into()));
        }
        self.generation.validate()?;
        self.translation.validate()?;
        for p in [
            &self.paths.records,
            &self.paths.lexicon,
            &self.paths.stopwords,
            &self.expansion.synonyms,
            &self.expansion.similarity,
        ]
        .into_iter()
        .flatten()
        {
            if !p.exists() {
                return Err(ConfigError::MissingPath(p.display().to_string()));
            }
        }
        Ok(())
    }
}
