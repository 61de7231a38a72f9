use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use intersect_bias_ffi::*;

fn take(s: *mut std::ffi::c_char) -> String {
    assert!(!s.is_null());
    let out = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_string();
    unsafe { ib_string_free(s) };
    out
}

fn last_error() -> String {
    let p = ib_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

const IDENTITY: &str =
    r#"{"religion":"Muslim","gender":"Female","marital_status":"Widowed","children":"ManyChildren"}"#;

#[test]
fn seed_lexicon_handle() {
    let mut lex = ptr::null_mut();
    assert_eq!(unsafe { ib_lexicon_seed(&mut lex) }, IbStatus::Ok);
    let mut len = 0usize;
    assert_eq!(unsafe { ib_lexicon_len(lex, &mut len) }, IbStatus::Ok);
    assert_eq!(len, 342);

    let id = CString::new(IDENTITY).unwrap();
    let mut json = ptr::null_mut();
    assert_eq!(
        unsafe { ib_lexicon_applicable_terms(lex, id.as_ptr(), &mut json) },
        IbStatus::Ok
    );
    let terms: Vec<String> = serde_json::from_str(&take(json)).unwrap();
    assert!(!terms.is_empty());
    assert!(terms.windows(2).all(|w| w[0] < w[1]));
    unsafe { ib_lexicon_free(lex) };
}

#[test]
fn null_and_bad_inputs_report_errors() {
    assert_eq!(unsafe { ib_lexicon_seed(ptr::null_mut()) }, IbStatus::NullPointer);
    assert!(last_error().contains("out"));

    let mut lex = ptr::null_mut();
    let csv = CString::new("not,a,lexicon\n").unwrap();
    assert_eq!(unsafe { ib_lexicon_from_csv(csv.as_ptr(), &mut lex) }, IbStatus::InvalidInput);
    assert!(lex.is_null());

    let path = CString::new("/no/such/lexicon.csv").unwrap();
    assert_eq!(unsafe { ib_lexicon_load(path.as_ptr(), &mut lex) }, IbStatus::Io);

    let mut len = 0usize;
    assert_eq!(unsafe { ib_lexicon_len(ptr::null(), &mut len) }, IbStatus::NullPointer);

    let ok = unsafe { ib_lexicon_seed(&mut lex) };
    assert_eq!(ok, IbStatus::Ok);
    assert!(ib_last_error_message().is_null());
    unsafe { ib_lexicon_free(lex) };
    unsafe { ib_lexicon_free(ptr::null_mut()) };
    unsafe { ib_string_free(ptr::null_mut()) };
}

#[test]
fn render_prompt() {
    let lang = CString::new("Hindi").unwrap();
    let id = CString::new(IDENTITY).unwrap();
    let app = CString::new("Story").unwrap();
    let loc = CString::new("school").unwrap();
    let mut out = ptr::null_mut();
    let status = unsafe { ib_render_prompt(lang.as_ptr(), id.as_ptr(), app.as_ptr(), loc.as_ptr(), &mut out) };
    assert_eq!(status, IbStatus::Ok);
    let prompt = take(out);
    assert!(prompt.contains("Muslim Female"), "{prompt}");

    let status = unsafe { ib_render_prompt(lang.as_ptr(), id.as_ptr(), app.as_ptr(), ptr::null(), &mut out) };
    assert_eq!(status, IbStatus::InvalidInput);
}

#[test]
fn corpus_and_scoring() {
    let record = |id: &str, text: &str| {
        serde_json::json!({
            "language": "Hindi",
            "method": "original",
            "identity": serde_json::from_str::<serde_json::Value>(IDENTITY).unwrap(),
            "application": {"kind": "HobbiesValues", "story_location": null},
            "prompt_text": "p",
            "raw_output": text,
            "english_text": text,
            "record_id": id,
        })
        .to_string()
    };
    let jsonl = CString::new(format!("{}\n{}\n", record("a", "she cooks for the family"), record("b", "grief"))).unwrap();
    let mut corpora = ptr::null_mut();
    assert_eq!(
        unsafe { ib_corpus_from_records(jsonl.as_ptr(), ptr::null(), true, &mut corpora) },
        IbStatus::Ok
    );
    let mut n = 0usize;
    assert_eq!(unsafe { ib_corpus_document_count(corpora, &mut n) }, IbStatus::Ok);
    assert_eq!(n, 1);

    let mut lex = ptr::null_mut();
    unsafe { ib_lexicon_seed(&mut lex) };
    let (mut scores, mut overall) = (ptr::null_mut(), ptr::null_mut());
    assert_eq!(
        unsafe { ib_score(corpora, lex, IbScope::Identity, &mut scores, &mut overall) },
        IbStatus::Ok
    );
    let scores = take(scores);
    let overall = take(overall);
    assert_eq!(scores.lines().count(), 1);
    assert_eq!(overall.lines().count(), 1);
    let cell: serde_json::Value = serde_json::from_str(scores.lines().next().unwrap()).unwrap();
    assert!(cell["bias_score"].as_f64().unwrap() >= 0.0);

    let mut scores = ptr::null_mut();
    assert_eq!(
        unsafe { ib_score(corpora, lex, IbScope::All, &mut scores, ptr::null_mut()) },
        IbStatus::Ok
    );
    take(scores);
    unsafe {
        ib_corpus_free(corpora);
        ib_lexicon_free(lex);
    }

    let dup = CString::new(format!("{}\n{}\n", record("a", "x"), record("a", "y"))).unwrap();
    let mut c = ptr::null_mut();
    assert_eq!(
        unsafe { ib_corpus_from_records(dup.as_ptr(), ptr::null(), false, &mut c) },
        IbStatus::InvalidInput
    );
}

#[test]
fn bin_column_codes() {
    let values = [0.0, 1.0, 2.0, 3.0, 4.0, 99.0];
    let present = [true, true, true, true, true, false];
    let mut bins = [IbBin::Mid; 6];
    let status = unsafe { ib_bin_column(values.as_ptr(), present.as_ptr(), 6, bins.as_mut_ptr()) };
    assert_eq!(status, IbStatus::Ok);
    // mean 2, sd sqrt(2)
    assert_eq!(
        bins,
        [IbBin::Low, IbBin::Mid, IbBin::Mid, IbBin::Mid, IbBin::High, IbBin::Absent]
    );
    let status = unsafe { ib_bin_column(values.as_ptr(), ptr::null(), 0, bins.as_mut_ptr()) };
    assert_eq!(status, IbStatus::InvalidInput);
}

#[test]
fn header_declares_api_and_compiles() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/intersect_bias.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "ib_last_error_message",
        "ib_string_free",
        "ib_lexicon_seed",
        "ib_lexicon_load",
        "ib_lexicon_free",
        "ib_lexicon_applicable_terms",
        "ib_render_prompt",
        "ib_corpus_from_records",
        "ib_corpus_free",
        "ib_score",
        "ib_bin_column",
        "typedef struct IbLexicon IbLexicon",
        "IB_STATUS_OK = 0",
    ] {
        assert!(text.contains(name), "{name}");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "intersect_bias.h"

int main(void) {
    IbLexicon *lex = NULL;
    size_t n = 0;
    if (ib_lexicon_seed(&lex) != IB_STATUS_OK) {
        return 1;
    }
    ib_lexicon_len(lex, &n);
    ib_lexicon_free(lex);
    if (ib_lexicon_seed(NULL) != IB_STATUS_NULL_POINTER || ib_last_error_message() == NULL) {
        return 2;
    }
    printf("%zu\n", n);
    return 0;
}
"#,
    )
    .unwrap();
    let lib_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let exe = dir.path().join("use");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(&src)
        .arg("-I")
        .arg(header.parent().unwrap())
        .arg("-L")
        .arg(&lib_dir)
        .arg(format!("-Wl,-rpath,{}", lib_dir.display()))
        .arg("-lintersect_bias_ffi")
        .status()
        .expect("C compiler available");
    assert!(status.success());
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "{:?}", run.status);
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "342");
}
