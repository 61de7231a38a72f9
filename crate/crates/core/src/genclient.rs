//! Generation, debiasing and translation against pluggable backends.
//!
//! [`run_matrix`] walks the prompt matrix for a set of languages: original
//! generations first, then the simple and complex debiasing passes over the
//! stored originals. Each finished record is appended to the sink as soon as
//! its batch completes, so an interrupted run resumes where it stopped.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::thread;
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::GenerationRecord;
use crate::identity::{
    debias_instruction, enumerate_identities, render_application_prompt, render_debias_prompt,
    Application, Identity, Language, PromptError, PromptMethod,
};

#[derive(Debug, Error)]
pub enum GenError {
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("malformed backend response: {0}")]
    MalformedResponse(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("debiasing requested without original generations: {0}")]
    PrerequisiteMissing(String),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Sampling parameters sent with every generation request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerationConfig {
    pub temperature: f64,
    pub top_k: u32,
    pub top_p: f64,
    pub max_new_tokens: u32,
    pub repetition_penalty: f64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            temperature: 0.7,
            top_k: 50,
            top_p: 0.9,
            max_new_tokens: 500,
            repetition_penalty: 1.5,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: &str| Err(GenError::InvalidConfig(m.to_string()));
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return bad("temperature must be >= 0");
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return bad("top_p must be in (0, 1]");
        }
        if self.max_new_tokens < 1 {
            return bad("max_new_tokens must be >= 1");
        }
        if self.repetition_penalty.is_nan() || self.repetition_penalty < 1.0 {
            return bad("repetition_penalty must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TranslationConfig {
    pub num_beams: u32,
    pub max_new_tokens: u32,
}

impl Default for TranslationConfig {
    fn default() -> Self {
        TranslationConfig {
            num_beams: 3,
            max_new_tokens: 500,
        }
    }
}

impl TranslationConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        if self.num_beams < 1 {
            return Err(GenError::InvalidConfig("num_beams must be >= 1".into()));
        }
        if self.max_new_tokens < 1 {
            return Err(GenError::InvalidConfig("max_new_tokens must be >= 1".into()));
        }
        Ok(())
    }
}

/// A text-completion and translation service.
pub trait Backend: Send + Sync {
    fn complete(&self, prompt: &str, config: &GenerationConfig) -> Result<String, GenError>;
    /// Translates into English.
    fn to_english(&self, text: &str, config: &TranslationConfig) -> Result<String, GenError>;
}

pub fn generate(
    prompt: &str,
    config: &GenerationConfig,
    backend: &dyn Backend,
) -> Result<String, GenError> {
    config.validate()?;
    backend.complete(prompt, config)
}

pub fn translate(
    text: &str,
    config: &TranslationConfig,
    backend: &dyn Backend,
) -> Result<String, GenError> {
    config.validate()?;
    if text.is_empty() {
        return Ok(String::new());
    }
    backend.to_english(text, config)
}

const STUB_NEUTRAL: &[&str] = &[
    "morning", "tea", "breakfast", "market", "friends", "walk", "reading", "garden", "prayer",
    "office", "evening", "dinner", "music", "newspaper", "bus", "neighbors", "festival",
    "temple", "mosque", "phone", "bank", "letter", "rice", "vegetables", "village", "city",
    "daily", "routine", "time", "week",
];
const STUB_CHARGED: &[&str] = &[
    "house", "family", "happy", "lonely", "care", "chores", "cook", "clean", "strong",
    "responsibility", "kind", "stress", "independent", "respect", "burden", "traditional",
    "violent", "sad", "pressure", "dignity", "provide", "protect", "grocery", "laundry",
    "household", "dishes", "secure", "conflict", "grief", "isolated",
];

/// Deterministic backend: output is a pure function of (seed, prompt).
/// Generations are English word salads; debiasing prompts return the
/// embedded text with some words removed; translation is the identity.
#[derive(Debug, Clone, Copy, Default)]
pub struct StubBackend {
    pub seed: u64,
}

impl StubBackend {
    fn rng(&self, prompt: &str) -> ChaCha8Rng {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(prompt.as_bytes());
        ChaCha8Rng::from_seed(hasher.finalize().into())
    }
}

impl Backend for StubBackend {
    fn complete(&self, prompt: &str, _config: &GenerationConfig) -> Result<String, GenError> {
        let mut rng = self.rng(prompt);
        for method in [PromptMethod::SimpleDebias, PromptMethod::ComplexDebias] {
            let instruction = debias_instruction(method).expect("debias method");
            if let Some(source) = prompt.strip_prefix(instruction) {
                let keep = if method == PromptMethod::SimpleDebias { 0.8 } else { 0.65 };
                let words: Vec<&str> = source
                    .split_whitespace()
                    .filter(|w| !STUB_CHARGED.contains(w) || rng.gen_bool(keep))
                    .collect();
                return Ok(if words.is_empty() {
                    source.to_string()
                } else {
                    words.join(" ")
                });
            }
        }
        let len = rng.gen_range(20..40);
        let charged_share = if prompt.contains("Female") { 0.35 } else { 0.2 };
        let words: Vec<&str> = (0..len)
            .map(|_| {
                let pool = if rng.gen_bool(charged_share) {
                    STUB_CHARGED
                } else {
                    STUB_NEUTRAL
                };
                *pool.choose(&mut rng).expect("non-empty pool")
            })
            .collect();
        Ok(words.join(" "))
    }

    fn to_english(&self, text: &str, _config: &TranslationConfig) -> Result<String, GenError> {
        Ok(text.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base_delay_ms: 500,
            max_delay_ms: 30_000,
        }
    }
}

impl RetryPolicy {
    /// Exponential backoff before retry `attempt` (0-based), capped.
    pub fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u64.checked_shl(attempt.min(32)).unwrap_or(u64::MAX);
        Duration::from_millis(self.base_delay_ms.saturating_mul(factor).min(self.max_delay_ms))
    }
}

#[derive(Debug, Serialize)]
struct CompletionRequest<'a> {
    prompt: &'a str,
    temperature: f64,
    top_k: u32,
    top_p: f64,
    max_new_tokens: u32,
    repetition_penalty: f64,
}

#[derive(Debug, Serialize)]
struct TranslationRequest<'a> {
    text: &'a str,
    num_beams: u32,
    max_new_tokens: u32,
}

#[derive(Debug, Deserialize)]
struct TextResponse {
    text: String,
}

/// JSON-over-HTTP backend.
///
/// Generation: `POST url` with `{prompt, temperature, top_k, top_p,
/// max_new_tokens, repetition_penalty}`. Translation: `POST translate_url`
/// with `{text, num_beams, max_new_tokens}`. Both answer `{"text": ...}`.
/// Connection errors, timeouts, 429 and 5xx are retried.
pub struct HttpBackend {
    client: reqwest::blocking::Client,
    url: String,
    translate_url: Option<String>,
    token: Option<String>,
    retry: RetryPolicy,
}

impl HttpBackend {
    pub fn new(
        url: impl Into<String>,
        translate_url: Option<String>,
        token: Option<String>,
        timeout: Duration,
        retry: RetryPolicy,
    ) -> Result<Self, GenError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| GenError::InvalidConfig(e.to_string()))?;
        Ok(HttpBackend {
            client,
            url: url.into(),
            translate_url,
            token,
            retry,
        })
    }

    fn post<T: Serialize>(&self, url: &str, body: &T) -> Result<String, GenError> {
        let mut last = String::new();
        for attempt in 0..=self.retry.max_retries {
            if attempt > 0 {
                thread::sleep(self.retry.delay(attempt - 1));
            }
            let mut req = self.client.post(url).json(body);
            if let Some(token) = &self.token {
                req = req.bearer_auth(token);
            }
            match req.send() {
                Ok(resp) => {
                    let status = resp.status();
                    if status.is_server_error() || status.as_u16() == 429 {
                        last = format!("{url}: HTTP {status}");
                        continue;
                    }
                    if !status.is_success() {
                        return Err(GenError::BackendUnavailable(format!("{url}: HTTP {status}")));
                    }
                    let bytes = resp
                        .bytes()
                        .map_err(|e| GenError::MalformedResponse(e.to_string()))?;
                    let parsed: TextResponse = serde_json::from_slice(&bytes)
                        .map_err(|e| GenError::MalformedResponse(format!("{url}: {e}")))?;
                    return Ok(parsed.text);
                }
                Err(e) => last = format!("{url}: {e}"),
            }
        }
        Err(GenError::BackendUnavailable(format!(
            "{last} (after {} retries)",
            self.retry.max_retries
        )))
    }
}

impl Backend for HttpBackend {
    fn complete(&self, prompt: &str, c: &GenerationConfig) -> Result<String, GenError> {
        self.post(
            &self.url,
            &CompletionRequest {
                prompt,
                temperature: c.temperature,
                top_k: c.top_k,
                top_p: c.top_p,
                max_new_tokens: c.max_new_tokens,
                repetition_penalty: c.repetition_penalty,
            },
        )
    }

    fn to_english(&self, text: &str, c: &TranslationConfig) -> Result<String, GenError> {
        let Some(url) = &self.translate_url else {
            return Ok(text.to_string());
        };
        self.post(
            url,
            &TranslationRequest {
                text,
                num_beams: c.num_beams,
                max_new_tokens: c.max_new_tokens,
            },
        )
    }
}

/// Append-only record store.
pub trait RecordSink {
    fn get(&self, record_id: &str) -> Option<&GenerationRecord>;
    fn append(&mut self, record: GenerationRecord) -> Result<(), GenError>;
}

#[derive(Debug, Default)]
pub struct MemorySink {
    pub records: Vec<GenerationRecord>,
    index: HashMap<String, usize>,
}

impl RecordSink for MemorySink {
    fn get(&self, id: &str) -> Option<&GenerationRecord> {
        self.index.get(id).map(|&i| &self.records[i])
    }

    fn append(&mut self, record: GenerationRecord) -> Result<(), GenError> {
        self.index.insert(record.record_id.clone(), self.records.len());
        self.records.push(record);
        Ok(())
    }
}

/// JSON Lines sink. Opening an existing file reloads its records so a run
/// can resume; a trailing partial line from an interrupted write is dropped.
pub struct JsonlSink {
    path: PathBuf,
    file: fs::File,
    memory: MemorySink,
}

impl JsonlSink {
    pub fn open(path: &Path) -> Result<Self, GenError> {
        let io = |source| GenError::Io {
            path: path.display().to_string(),
            source,
        };
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io)?;
        }
        let mut memory = MemorySink::default();
        let mut valid_len = 0u64;
        if path.exists() {
            let reader = BufReader::new(fs::File::open(path).map_err(io)?);
            for line in reader.split(b'\n') {
                let line = line.map_err(io)?;
                match serde_json::from_slice::<GenerationRecord>(&line) {
                    Ok(r) => {
                        valid_len += line.len() as u64 + 1;
                        memory.append(r)?;
                    }
                    Err(_) => break,
                }
            }
        }
        let file = fs::OpenOptions::new()
            .create(true)
            .write(true)
            .truncate(false)
            .open(path)
            .map_err(io)?;
        file.set_len(valid_len).map_err(io)?;
        let mut sink = JsonlSink {
            path: path.to_path_buf(),
            file,
            memory,
        };
        use std::io::Seek;
        sink.file
            .seek(std::io::SeekFrom::End(0))
            .map_err(|source| GenError::Io {
                path: sink.path.display().to_string(),
                source,
            })?;
        Ok(sink)
    }

    pub fn records(&self) -> &[GenerationRecord] {
        &self.memory.records
    }
}

impl RecordSink for JsonlSink {
    fn get(&self, id: &str) -> Option<&GenerationRecord> {
        self.memory.get(id)
    }

    fn append(&mut self, record: GenerationRecord) -> Result<(), GenError> {
        let mut line = serde_json::to_vec(&record).expect("record serializes");
        line.push(b'\n');
        self.file
            .write_all(&line)
            .and_then(|_| self.file.flush())
            .map_err(|source| GenError::Io {
                path: self.path.display().to_string(),
                source,
            })?;
        self.memory.append(record)
    }
}

pub fn record_id(language: Language, method: PromptMethod, identity: &Identity, app: &Application) -> String {
    format!(
        "{}-{}-{}-{}",
        language.name().to_lowercase(),
        method.label(),
        identity.code(),
        app.code()
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellFailure {
    pub record_id: String,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub generated: usize,
    pub resumed: usize,
    /// Records present in the sink per `<language>_<method>` after the run.
    pub per_cell: BTreeMap<String, usize>,
    pub failures: Vec<CellFailure>,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub concurrency: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { concurrency: 4 }
    }
}

struct Task {
    language: Language,
    method: PromptMethod,
    identity: Identity,
    app: Application,
    id: String,
    prompt: String,
}

fn run_task(
    task: &Task,
    backend: &dyn Backend,
    gen: &GenerationConfig,
    trans: &TranslationConfig,
) -> Result<GenerationRecord, GenError> {
    let raw_output = generate(&task.prompt, gen, backend)?;
    let english_text = translate(&raw_output, trans, backend)?;
    Ok(GenerationRecord {
        language: task.language,
        method: task.method,
        identity: task.identity,
        application: task.app,
        prompt_text: task.prompt.clone(),
        raw_output,
        english_text,
        record_id: task.id.clone(),
    })
}

fn run_phase(
    tasks: Vec<Task>,
    backend: &dyn Backend,
    gen: &GenerationConfig,
    trans: &TranslationConfig,
    sink: &mut dyn RecordSink,
    pool: &rayon::ThreadPool,
    summary: &mut RunSummary,
) -> Result<(), GenError> {
    let batch = pool.current_num_threads().max(1) * 8;
    for chunk in tasks.chunks(batch) {
        let results: Vec<Result<GenerationRecord, GenError>> = pool.install(|| {
            chunk
                .par_iter()
                .map(|t| run_task(t, backend, gen, trans))
                .collect()
        });
        for (task, result) in chunk.iter().zip(results) {
            match result {
                Ok(record) => {
                    sink.append(record)?;
                    summary.generated += 1;
                }
                Err(e) => summary.failures.push(CellFailure {
                    record_id: task.id.clone(),
                    error: e.to_string(),
                }),
            }
        }
    }
    Ok(())
}

/// Runs the full prompt matrix for `languages` and `methods`.
///
/// Records already in the sink are skipped. Debiasing a cell requires its
/// original record; if originals are neither requested nor stored, the run
/// fails with [`GenError::PrerequisiteMissing`] before any request is made.
pub fn run_matrix(
    languages: &[Language],
    methods: &[PromptMethod],
    backend: &dyn Backend,
    gen: &GenerationConfig,
    trans: &TranslationConfig,
    sink: &mut dyn RecordSink,
    options: &RunOptions,
) -> Result<RunSummary, GenError> {
    gen.validate()?;
    trans.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.concurrency.max(1))
        .build()
        .map_err(|e| GenError::InvalidConfig(e.to_string()))?;

    let cells: Vec<(Language, Identity, Application)> = languages
        .iter()
        .flat_map(|&l| {
            enumerate_identities()
                .into_iter()
                .flat_map(move |id| Application::all().into_iter().map(move |app| (l, id, app)))
        })
        .collect();

    let wants_original = methods.contains(&PromptMethod::Original);
    if !wants_original && methods.iter().any(|m| m.is_debias()) {
        if let Some(&(l, id, app)) = cells
            .iter()
            .find(|(l, id, app)| sink.get(&record_id(*l, PromptMethod::Original, id, app)).is_none())
        {
            return Err(GenError::PrerequisiteMissing(record_id(
                l,
                PromptMethod::Original,
                &id,
                &app,
            )));
        }
    }

    let mut summary = RunSummary::default();
    let mut phases: Vec<PromptMethod> = methods.to_vec();
    phases.sort();
    phases.dedup();
    for method in phases {
        let mut tasks = Vec::new();
        for &(language, identity, app) in &cells {
            let id = record_id(language, method, &identity, &app);
            if sink.get(&id).is_some() {
                summary.resumed += 1;
                continue;
            }
            let prompt = if method.is_debias() {
                let original_id = record_id(language, PromptMethod::Original, &identity, &app);
                match sink.get(&original_id) {
                    Some(original) => render_debias_prompt(method, &original.raw_output)?,
                    None => {
                        summary.failures.push(CellFailure {
                            record_id: id,
                            error: format!("original `{original_id}` unavailable"),
                        });
                        continue;
                    }
                }
            } else {
                render_application_prompt(&identity, &app, language)?
            };
            tasks.push(Task {
                language,
                method,
                identity,
                app,
                id,
                prompt,
            });
        }
        run_phase(tasks, backend, gen, trans, sink, &pool, &mut summary)?;
    }

    for &(language, identity, app) in &cells {
        for &method in methods {
            if sink.get(&record_id(language, method, &identity, &app)).is_some() {
                *summary
                    .per_cell
                    .entry(crate::corpus::cell_name(language, method))
                    .or_insert(0) += 1;
            }
        }
    }
    Ok(summary)
}
