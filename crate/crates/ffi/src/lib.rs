//! C ABI for the axe extraction pipeline.
//!
//! Conventions:
//!
//! - Every fallible function returns an [`AxeStatus`]; on anything other
//!   than `AXE_STATUS_OK` (and `AXE_STATUS_DEGRADED`, which still produces
//!   output) a message is available from [`axe_last_error`] on the same
//!   thread.
//! - Strings passed in are NUL-terminated UTF-8. Strings handed out are
//!   owned by the caller and must be released with [`axe_string_free`].
//! - Handles are opaque; free them with their matching `*_free` function.
//!   A pipeline handle may be shared between threads; a document handle is
//!   read-only after parsing and may be shared as well.

use std::cell::RefCell;
use std::ffi::{c_char, c_double, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use axe_core::evalkit::metrics::token_f1;
use axe_core::extractor::ExtractionQuery;
use axe_core::gxr::{find_closest_node_with, gestalt_ratio, TextChunkIndex, TieRule};
use axe_core::pipeline::{ConfigLayer, Pipeline, PipelineConfig};
use axe_core::preprocess::preprocess;
use axe_core::{parse_html, AxeError, DomTree, WordTokenizer};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxeStatus {
    Ok = 0,
    /// Output was produced but a model response could not be parsed.
    Degraded = 1,
    NullPointer = 2,
    InvalidUtf8 = 3,
    /// Bad schema, XPath, budget or other argument.
    InvalidArgument = 4,
    Config = 5,
    Parse = 6,
    /// The model endpoint failed or a scripted response was missing.
    Client = 7,
    Io = 8,
    /// A Rust panic was caught at the boundary.
    Internal = 9,
}

/// A parsed page, with its noise-stripped tree indexed for grounding.
pub struct AxeDocument {
    tree: DomTree,
    stripped: DomTree,
    index: TextChunkIndex,
}

/// A configured pipeline with its model client.
pub struct AxePipeline {
    inner: Pipeline,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Failure(AxeStatus, String);

impl From<AxeError> for Failure {
    fn from(e: AxeError) -> Failure {
        let status = match &e {
            AxeError::Client(_) => AxeStatus::Client,
            AxeError::Config(_) => AxeStatus::Config,
            AxeError::Io(_) => AxeStatus::Io,
            AxeError::EmptyInput => AxeStatus::Parse,
            _ => AxeStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Failure {
        Failure(AxeStatus::Internal, e.to_string())
    }
}

/// Runs `f`, converting errors and panics into a status and a stored message.
fn guard(f: impl FnOnce() -> Result<AxeStatus, Failure>) -> AxeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(status)) => status,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {msg}"));
            AxeStatus::Internal
        }
    }
}

unsafe fn arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure(AxeStatus::NullPointer, format!("{name} is null")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| Failure(AxeStatus::NullPointer, format!("{name} is null")))
}

unsafe fn text<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(AxeStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(AxeStatus::InvalidUtf8, format!("{name}: {e}")))
}

fn owned(s: String) -> *mut c_char {
    CString::new(s.replace('\0', "")).expect("NULs removed").into_raw()
}

fn json_out(v: &serde_json::Value, dst: &mut *mut c_char) -> Result<(), Failure> {
    *dst = owned(serde_json::to_string(v)?);
    Ok(())
}

/// Message for the last failed call on this thread, or NULL. Valid until the
/// next failing call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn axe_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn axe_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn axe_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses `html` into a new document handle stored in `*out`.
///
/// # Safety
/// `html` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn axe_document_parse(html: *const c_char, out: *mut *mut AxeDocument) -> AxeStatus {
    guard(|| {
        let dst = out_ptr(out, "out")?;
        *dst = ptr::null_mut();
        let tree = parse_html(text(html, "html")?)?;
        let stripped = preprocess(&tree, &WordTokenizer).stripped;
        let index = TextChunkIndex::build(&stripped);
        *dst = Box::into_raw(Box::new(AxeDocument { tree, stripped, index }));
        Ok(AxeStatus::Ok)
    })
}

/// # Safety
/// `doc` must come from [`axe_document_parse`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn axe_document_free(doc: *mut AxeDocument) {
    if !doc.is_null() {
        drop(Box::from_raw(doc));
    }
}

/// Whitespace-collapsed visible text of the whole page.
///
/// # Safety
/// Pointers must be valid; `*out` receives a string to free with
/// [`axe_string_free`].
#[no_mangle]
pub unsafe extern "C" fn axe_document_visible_text(doc: *const AxeDocument, out: *mut *mut c_char) -> AxeStatus {
    guard(|| {
        let doc = arg(doc, "doc")?;
        let dst = out_ptr(out, "out")?;
        *dst = owned(doc.tree.visible_text(doc.tree.root_id()));
        Ok(AxeStatus::Ok)
    })
}

/// Locates the text chunk closest to `search` in the noise-stripped page.
/// `*out` receives a JSON object `{"found", "text", "xpath", "sub_index",
/// "score"}`. `lexicographic` selects the (similarity, overlap) acceptance
/// order instead of the default rule.
///
/// # Safety
/// Pointers must be valid; free `*out` with [`axe_string_free`].
#[no_mangle]
pub unsafe extern "C" fn axe_document_ground(
    doc: *const AxeDocument,
    search: *const c_char,
    lexicographic: bool,
    out: *mut *mut c_char,
) -> AxeStatus {
    guard(|| {
        let doc = arg(doc, "doc")?;
        let dst = out_ptr(out, "out")?;
        let rule = if lexicographic { TieRule::Lexicographic } else { TieRule::Conjunctive };
        let m = find_closest_node_with(&doc.stripped, &doc.index, text(search, "search")?, rule);
        json_out(&serde_json::to_value(&m)?, dst)?;
        Ok(AxeStatus::Ok)
    })
}

/// Builds a pipeline from a TOML configuration string (NULL for defaults),
/// layered over `AXE_*` environment variables.
///
/// # Safety
/// `config_toml` must be NULL or a valid C string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn axe_pipeline_new(config_toml: *const c_char, out: *mut *mut AxePipeline) -> AxeStatus {
    guard(|| {
        let dst = out_ptr(out, "out")?;
        *dst = ptr::null_mut();
        let mut layers = vec![ConfigLayer::from_env()?];
        if !config_toml.is_null() {
            layers.push(ConfigLayer::from_toml(text(config_toml, "config")?)?);
        }
        let config = PipelineConfig::resolve(layers)?;
        let inner = Pipeline::new(config)?;
        *dst = Box::into_raw(Box::new(AxePipeline { inner }));
        Ok(AxeStatus::Ok)
    })
}

/// # Safety
/// `pipeline` must come from [`axe_pipeline_new`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn axe_pipeline_free(pipeline: *mut AxePipeline) {
    if !pipeline.is_null() {
        drop(Box::from_raw(pipeline));
    }
}

unsafe fn run(
    pipeline: *const AxePipeline,
    html: *const c_char,
    query: impl FnOnce() -> Result<ExtractionQuery, Failure>,
    out: *mut *mut c_char,
) -> AxeStatus {
    guard(|| {
        let p = arg(pipeline, "pipeline")?;
        let dst = out_ptr(out, "out")?;
        *dst = ptr::null_mut();
        let run = p.inner.run(text(html, "html")?, &query()?)?;
        json_out(&run.output_json(), dst)?;
        Ok(if run.degraded() { AxeStatus::Degraded } else { AxeStatus::Ok })
    })
}

/// Fills a flat JSON schema (`{"key": "", ...}`) from `html`. `*out` receives
/// the filled object, with a `_grounding` member unless grounding is off.
///
/// # Safety
/// Pointers must be valid; free `*out` with [`axe_string_free`].
#[no_mangle]
pub unsafe extern "C" fn axe_pipeline_extract(
    pipeline: *const AxePipeline,
    html: *const c_char,
    schema_json: *const c_char,
    out: *mut *mut c_char,
) -> AxeStatus {
    run(
        pipeline,
        html,
        || Ok(ExtractionQuery::schema_from_json(text(schema_json, "schema")?)?),
        out,
    )
}

/// Answers `question` about `html`; `*out` receives `{"answer": ...}`.
///
/// # Safety
/// Pointers must be valid; free `*out` with [`axe_string_free`].
#[no_mangle]
pub unsafe extern "C" fn axe_pipeline_qa(
    pipeline: *const AxePipeline,
    html: *const c_char,
    question: *const c_char,
    out: *mut *mut c_char,
) -> AxeStatus {
    run(pipeline, html, || Ok(ExtractionQuery::qa(text(question, "question")?)?), out)
}

/// Prunes `html` for `query`. `*out` receives `{"distilled_html",
/// "kept_xpaths", "tokens_before", "tokens_after", "fail_open_batches"}`.
///
/// # Safety
/// Pointers must be valid; free `*out` with [`axe_string_free`].
#[no_mangle]
pub unsafe extern "C" fn axe_pipeline_prune(
    pipeline: *const AxePipeline,
    html: *const c_char,
    query: *const c_char,
    out: *mut *mut c_char,
) -> AxeStatus {
    guard(|| {
        let p = arg(pipeline, "pipeline")?;
        let dst = out_ptr(out, "out")?;
        *dst = ptr::null_mut();
        let (_, pruned) = p.inner.prune(text(html, "html")?, text(query, "query")?)?;
        let v = serde_json::json!({
            "distilled_html": pruned.distilled_html,
            "kept_xpaths": pruned.kept_xpaths,
            "tokens_before": pruned.tokens_before,
            "tokens_after": pruned.tokens_after,
            "fail_open_batches": pruned.fail_open_batches,
        });
        json_out(&v, dst)?;
        Ok(if pruned.fail_open_batches > 0 { AxeStatus::Degraded } else { AxeStatus::Ok })
    })
}

/// Ratcliff-Obershelp similarity of two strings.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn axe_gestalt_ratio(a: *const c_char, b: *const c_char, out: *mut c_double) -> AxeStatus {
    guard(|| {
        let dst = out_ptr(out, "out")?;
        *dst = gestalt_ratio(text(a, "a")?, text(b, "b")?);
        Ok(AxeStatus::Ok)
    })
}

/// SQuAD-style token F1 of `prediction` (NULL for no value) against one
/// gold answer (NULL for no value).
///
/// # Safety
/// Non-NULL strings must be valid; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn axe_token_f1(
    prediction: *const c_char,
    gold: *const c_char,
    out: *mut c_double,
) -> AxeStatus {
    guard(|| {
        let dst = out_ptr(out, "out")?;
        let pred = if prediction.is_null() { None } else { Some(text(prediction, "prediction")?) };
        let gold = if gold.is_null() { None } else { Some(text(gold, "gold")?.to_string()) };
        *dst = token_f1(pred, &[gold]);
        Ok(AxeStatus::Ok)
    })
}
