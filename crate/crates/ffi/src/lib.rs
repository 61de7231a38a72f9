//! C ABI over `intersect_bias`.
//!
//! Every fallible function returns an [`IbStatus`]. On failure a message is
//! available from [`ib_last_error_message`] on the same thread. Strings
//! returned through out-parameters are owned by the caller and must be
//! released with [`ib_string_free`]; handles are released with their
//! matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use intersect_bias::corpus::{AcceptAll, LanguageDetector, ScriptDetector};
use intersect_bias::identity::{
    render_application_prompt, Application, ApplicationKind, Identity, Language, StoryLocation,
};
use intersect_bias::lexicon::{applicable_terms, load_lexicon, seed_lexicon, BiasLexicon};
use intersect_bias::pipeline::{ingest, score_all, Corpora};
use intersect_bias::report::{bin_column, BinClass};
use intersect_bias::scoring::Scope;
use intersect_bias::text::{default_stopwords, parse_stopwords};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidInput = 3,
    Io = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IbScope {
    Identity = 0,
    All = 1,
}

/// Bin assigned to one value of a column.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IbBin {
    Absent = -1,
    Low = 0,
    Mid = 1,
    High = 2,
}

/// Opaque bias lexicon.
pub struct IbLexicon(BiasLexicon);

/// Opaque set of corpora, one per language and prompting method.
pub struct IbCorpusSet(Corpora);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(IbStatus, String);

impl From<intersect_bias::Error> for Failure {
    fn from(e: intersect_bias::Error) -> Self {
        let status = if e.exit_code() == 3 { IbStatus::Io } else { IbStatus::InvalidInput };
        Failure(status, e.to_string())
    }
}

fn invalid(message: impl ToString) -> Failure {
    Failure(IbStatus::InvalidInput, message.to_string())
}

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> IbStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => IbStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(&message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            IbStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(IbStatus::NullPointer, format!("`{name}` is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(IbStatus::InvalidUtf8, format!("`{name}` is not UTF-8")))
}

unsafe fn opt_str_arg<'a>(p: *const c_char, name: &str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        Ok(None)
    } else {
        str_arg(p, name).map(Some)
    }
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| Failure(IbStatus::NullPointer, format!("`{name}` is null")))
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure(IbStatus::NullPointer, format!("`{name}` is null")))
}

fn to_c(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| invalid("output contains a nul byte"))
}

/// Message for the last failure on this thread, or null. The pointer stays
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn ib_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn ib_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Creates a handle holding the built-in seed lexicon.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ib_lexicon_seed(out: *mut *mut IbLexicon) -> IbStatus {
    guard(|| {
        *out_arg(out, "out")? = Box::into_raw(Box::new(IbLexicon(seed_lexicon())));
        Ok(())
    })
}

/// Parses a lexicon from CSV text.
///
/// # Safety
/// `csv` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ib_lexicon_from_csv(csv: *const c_char, out: *mut *mut IbLexicon) -> IbStatus {
    guard(|| {
        let text = str_arg(csv, "csv")?;
        let out = out_arg(out, "out")?;
        let lexicon = load_lexicon(text.as_bytes()).map_err(invalid)?;
        *out = Box::into_raw(Box::new(IbLexicon(lexicon)));
        Ok(())
    })
}

/// Loads a lexicon CSV file.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ib_lexicon_load(path: *const c_char, out: *mut *mut IbLexicon) -> IbStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let out = out_arg(out, "out")?;
        let lexicon = intersect_bias::pipeline::load_lexicon_file(Path::new(path))?;
        *out = Box::into_raw(Box::new(IbLexicon(lexicon)));
        Ok(())
    })
}

/// Number of entries.
///
/// # Safety
/// `lexicon` must be a live handle and `out_len` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ib_lexicon_len(lexicon: *const IbLexicon, out_len: *mut usize) -> IbStatus {
    guard(|| {
        *out_arg(out_len, "out_len")? = handle(lexicon, "lexicon")?.0.len();
        Ok(())
    })
}

/// # Safety
/// `lexicon` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn ib_lexicon_free(lexicon: *mut IbLexicon) {
    if !lexicon.is_null() {
        drop(Box::from_raw(lexicon));
    }
}

/// Lemmas applicable to an identity, as a sorted JSON array. The identity
/// is a JSON object such as
/// `{"religion":"Hindu","gender":"Female","marital_status":"Married","children":"OneChild"}`.
///
/// # Safety
/// Pointers must be valid; `identity_json` nul-terminated.
#[no_mangle]
pub unsafe extern "C" fn ib_lexicon_applicable_terms(
    lexicon: *const IbLexicon,
    identity_json: *const c_char,
    out_json: *mut *mut c_char,
) -> IbStatus {
    guard(|| {
        let lexicon = handle(lexicon, "lexicon")?;
        let identity: Identity =
            serde_json::from_str(str_arg(identity_json, "identity_json")?).map_err(invalid)?;
        let out = out_arg(out_json, "out_json")?;
        let terms = applicable_terms(&lexicon.0, &identity);
        *out = to_c(serde_json::to_string(&terms).expect("terms serialize"))?;
        Ok(())
    })
}

/// Renders an application prompt. `application` is a kind name such as
/// `"Story"` or `"To-do List"`; `story_location` is required for stories
/// and must be null otherwise.
///
/// # Safety
/// String arguments must be nul-terminated (or null where allowed) and
/// `out_prompt` valid.
#[no_mangle]
pub unsafe extern "C" fn ib_render_prompt(
    language: *const c_char,
    identity_json: *const c_char,
    application: *const c_char,
    story_location: *const c_char,
    out_prompt: *mut *mut c_char,
) -> IbStatus {
    guard(|| {
        let language: Language = str_arg(language, "language")?.parse().map_err(invalid)?;
        let identity: Identity =
            serde_json::from_str(str_arg(identity_json, "identity_json")?).map_err(invalid)?;
        let kind: ApplicationKind = str_arg(application, "application")?.parse().map_err(invalid)?;
        let story_location = opt_str_arg(story_location, "story_location")?
            .map(str::parse::<StoryLocation>)
            .transpose()
            .map_err(invalid)?;
        let out = out_arg(out_prompt, "out_prompt")?;
        let app = Application { kind, story_location };
        let prompt = render_application_prompt(&identity, &app, language).map_err(invalid)?;
        *out = to_c(prompt)?;
        Ok(())
    })
}

/// Cleans generation records (JSON Lines text) and builds corpora.
/// `stopwords` is a newline-separated list or null for the built-in list.
/// With `detect_language` false, no record is dropped as non-English.
///
/// # Safety
/// String arguments must be nul-terminated (or null where allowed) and
/// `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ib_corpus_from_records(
    records_jsonl: *const c_char,
    stopwords: *const c_char,
    detect_language: bool,
    out: *mut *mut IbCorpusSet,
) -> IbStatus {
    guard(|| {
        let text = str_arg(records_jsonl, "records_jsonl")?;
        let stopwords = match opt_str_arg(stopwords, "stopwords")? {
            Some(s) => parse_stopwords(s),
            None => default_stopwords(),
        };
        let out = out_arg(out, "out")?;
        let mut records = Vec::new();
        let mut ids = std::collections::HashSet::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let record: intersect_bias::corpus::GenerationRecord = serde_json::from_str(line)
                .map_err(|e| invalid(format!("line {}: {e}", i + 1)))?;
            if !ids.insert(record.record_id.clone()) {
                return Err(invalid(format!("duplicate record id `{}`", record.record_id)));
            }
            records.push(record);
        }
        let detector: &dyn LanguageDetector = if detect_language { &ScriptDetector } else { &AcceptAll };
        let (corpora, _) = ingest(records, detector, &stopwords);
        *out = Box::into_raw(Box::new(IbCorpusSet(corpora)));
        Ok(())
    })
}

/// Total number of documents across all corpora.
///
/// # Safety
/// `corpora` must be a live handle and `out_count` valid.
#[no_mangle]
pub unsafe extern "C" fn ib_corpus_document_count(
    corpora: *const IbCorpusSet,
    out_count: *mut usize,
) -> IbStatus {
    guard(|| {
        let corpora = handle(corpora, "corpora")?;
        *out_arg(out_count, "out_count")? = corpora.0.values().map(|c| c.n()).sum();
        Ok(())
    })
}

/// # Safety
/// `corpora` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn ib_corpus_free(corpora: *mut IbCorpusSet) {
    if !corpora.is_null() {
        drop(Box::from_raw(corpora));
    }
}

/// Scores every document. Score cells are written as JSON Lines to
/// `out_scores`; overall top terms go to `out_overall` when it is non-null.
///
/// # Safety
/// Handles must be live; `out_scores` valid; `out_overall` valid or null.
#[no_mangle]
pub unsafe extern "C" fn ib_score(
    corpora: *const IbCorpusSet,
    lexicon: *const IbLexicon,
    scope: IbScope,
    out_scores: *mut *mut c_char,
    out_overall: *mut *mut c_char,
) -> IbStatus {
    guard(|| {
        let corpora = handle(corpora, "corpora")?;
        let lexicon = handle(lexicon, "lexicon")?;
        let out_scores = out_arg(out_scores, "out_scores")?;
        let scope = match scope {
            IbScope::Identity => Scope::IdentityScoped,
            IbScope::All => Scope::AllTerms,
        };
        let (scores, overall) = score_all(&corpora.0, &lexicon.0, scope)?;
        let jsonl = |items: Vec<String>| items.into_iter().map(|l| l + "\n").collect::<String>();
        let scores = jsonl(scores.iter().map(|c| serde_json::to_string(c).expect("serializes")).collect());
        *out_scores = to_c(scores)?;
        if let Some(slot) = out_overall.as_mut() {
            let overall =
                jsonl(overall.iter().map(|c| serde_json::to_string(c).expect("serializes")).collect());
            *slot = to_c(overall)?;
        }
        Ok(())
    })
}

/// Bins a column at mean ± one population standard deviation. `present`
/// marks which values exist (null means all do); absent values get
/// `IbBin::Absent` and do not enter the statistics.
///
/// # Safety
/// `values` and `out_bins` must hold `len` elements; `present` likewise
/// unless null.
#[no_mangle]
pub unsafe extern "C" fn ib_bin_column(
    values: *const f64,
    present: *const bool,
    len: usize,
    out_bins: *mut IbBin,
) -> IbStatus {
    guard(|| {
        if len == 0 {
            return Err(invalid("column is empty"));
        }
        if values.is_null() || out_bins.is_null() {
            return Err(Failure(IbStatus::NullPointer, "`values` or `out_bins` is null".into()));
        }
        let values = std::slice::from_raw_parts(values, len);
        let column: Vec<Option<f64>> = if present.is_null() {
            values.iter().copied().map(Some).collect()
        } else {
            let present = std::slice::from_raw_parts(present, len);
            values.iter().zip(present).map(|(&v, &p)| p.then_some(v)).collect()
        };
        let bins = bin_column(&column).map_err(invalid)?;
        let out = std::slice::from_raw_parts_mut(out_bins, len);
        for (slot, bin) in out.iter_mut().zip(bins) {
            *slot = match bin {
                None => IbBin::Absent,
                Some(BinClass::Low) => IbBin::Low,
                Some(BinClass::Mid) => IbBin::Mid,
                Some(BinClass::High) => IbBin::High,
            };
        }
        Ok(())
    })
}
