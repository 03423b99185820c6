//! C ABI over `pex-core`.
//!
//! Every fallible function returns a [`PexStatus`]. On failure a message is
//! available from [`pex_last_error`] on the same thread. Strings handed out
//! through `out` parameters are owned by the caller and released with
//! [`pex_string_free`]; corpora with [`pex_corpus_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::Arc;

use pex_core::backend::{Backend, CachedBackend, OracleBackend, TranscriptCache};
use pex_core::corpus::{derive_follows, load_corpus, Corpus, NodeKind, RawBehaviorGraph};
use pex_core::eval::{score_document, EvalReport, MatchConfig};
use pex_core::pipeline::{ActivitySource, Extractor};
use pex_core::prompting::{Bindings, PromptBuilder, QuestionKind, Setting};
use pex_core::worldmodel::WorldModel;

/// Result of an FFI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PexStatus {
    Ok = 0,
    /// A null pointer, invalid UTF-8 or an unknown enum string.
    InvalidArgument = 1,
    /// Corpus, model or evaluation input failed validation.
    DataError = 2,
    /// The completion backend failed, including replay cache misses.
    BackendError = 3,
    /// A Rust panic was caught at the boundary.
    Panic = 4,
}

/// Opaque handle to a loaded corpus.
pub struct PexCorpus {
    inner: Corpus,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(PexStatus, String);

impl Failure {
    fn invalid(msg: impl Into<String>) -> Self {
        Failure(PexStatus::InvalidArgument, msg.into())
    }

    fn data(msg: impl ToString) -> Self {
        Failure(PexStatus::DataError, msg.to_string())
    }
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PexStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PexStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_last_error(&format!("panic: {msg}"));
            PexStatus::Panic
        }
    }
}

unsafe fn opt_str<'a>(p: *const c_char, name: &str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Some)
        .map_err(|_| Failure::invalid(format!("{name} is not valid UTF-8")))
}

unsafe fn req_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    opt_str(p, name)?.ok_or_else(|| Failure::invalid(format!("{name} is null")))
}

unsafe fn corpus_ref<'a>(p: *const PexCorpus) -> Result<&'a Corpus, Failure> {
    p.as_ref()
        .map(|c| &c.inner)
        .ok_or_else(|| Failure::invalid("corpus is null"))
}

unsafe fn give_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::invalid("out is null"));
    }
    let c = CString::new(s).map_err(|_| Failure::data("output contains a nul byte"))?;
    *out = c.into_raw();
    Ok(())
}

unsafe fn give_corpus(out: *mut *mut PexCorpus, corpus: Corpus) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::invalid("out is null"));
    }
    *out = Box::into_raw(Box::new(PexCorpus { inner: corpus }));
    Ok(())
}

fn parse<T: std::str::FromStr>(s: &str, name: &str) -> Result<T, Failure>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e| Failure::invalid(format!("{name}: {e}")))
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next FFI call on the same thread.
#[no_mangle]
pub extern "C" fn pex_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a pointer obtained from this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pex_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Opens the corpus bundled with the library.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn pex_corpus_bundled(out: *mut *mut PexCorpus) -> PexStatus {
    guard(|| give_corpus(out, Corpus::bundled()))
}

/// Loads and validates a canonical corpus file.
///
/// # Safety
/// `path` must be a nul-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pex_corpus_load(path: *const c_char, out: *mut *mut PexCorpus) -> PexStatus {
    guard(|| {
        let path = req_str(path, "path")?;
        let corpus = load_corpus(Path::new(path)).map_err(Failure::data)?;
        give_corpus(out, corpus)
    })
}

/// Releases a corpus. Null is ignored.
///
/// # Safety
/// `corpus` must be null or a handle from this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pex_corpus_free(corpus: *mut PexCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// Number of documents in the corpus; 0 for null.
///
/// # Safety
/// `corpus` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pex_corpus_len(corpus: *const PexCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.inner.len())
}

/// Renders the prompt for `question` ("q1".."q3") under `setting` ("raw",
/// "defs", "2shots", "defs+2shots"). `x` and `y` may be null.
///
/// # Safety
/// String arguments must be null or nul-terminated; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pex_render_prompt(
    corpus: *const PexCorpus,
    doc_id: *const c_char,
    question: *const c_char,
    setting: *const c_char,
    x: *const c_char,
    y: *const c_char,
    out: *mut *mut c_char,
) -> PexStatus {
    guard(|| {
        let corpus = corpus_ref(corpus)?;
        let doc_id = req_str(doc_id, "doc_id")?;
        let question: QuestionKind = parse(req_str(question, "question")?, "question")?;
        let setting: Setting = parse(req_str(setting, "setting")?, "setting")?;
        let bindings = Bindings {
            x: opt_str(x, "x")?.map(str::to_string),
            y: opt_str(y, "y")?.map(str::to_string),
        };
        let entry = corpus
            .get(doc_id)
            .ok_or_else(|| Failure::data(format!("document {doc_id} is not in the corpus")))?;
        let builder = PromptBuilder::from_corpus(corpus).unwrap_or_else(|_| PromptBuilder::bundled());
        let prompt = builder
            .render(question, setting, &entry.document, &bindings)
            .map_err(|e| Failure::invalid(e.to_string()))?;
        give_string(out, prompt.text)
    })
}

/// Runs the question dialogue on one document and returns the model JSON.
///
/// `source` is "extracted" or "gold". `backend` is "oracle" or "replay";
/// replay requires `cache_path`, which oracle records into when non-null.
///
/// # Safety
/// String arguments must be null or nul-terminated; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pex_extract(
    corpus: *const PexCorpus,
    doc_id: *const c_char,
    setting: *const c_char,
    source: *const c_char,
    backend: *const c_char,
    cache_path: *const c_char,
    out: *mut *mut c_char,
) -> PexStatus {
    guard(|| {
        let corpus = corpus_ref(corpus)?;
        let doc_id = req_str(doc_id, "doc_id")?;
        let setting: Setting = parse(req_str(setting, "setting")?, "setting")?;
        let cache_path = opt_str(cache_path, "cache_path")?;
        let entry = corpus
            .get(doc_id)
            .ok_or_else(|| Failure::data(format!("document {doc_id} is not in the corpus")))?;
        let source = match req_str(source, "source")? {
            "extracted" => ActivitySource::Extracted,
            "gold" => ActivitySource::Gold(&entry.gold),
            other => return Err(Failure::invalid(format!("unknown activity source {other:?}"))),
        };
        let open = |p: &str| {
            TranscriptCache::open(Path::new(p))
                .map(Arc::new)
                .map_err(Failure::data)
        };
        let backend: Box<dyn Backend> = match (req_str(backend, "backend")?, cache_path) {
            ("oracle", None) => Box::new(OracleBackend::new(corpus)),
            ("oracle", Some(p)) => Box::new(CachedBackend::recording(open(p)?, Box::new(OracleBackend::new(corpus)))),
            ("replay", Some(p)) => Box::new(CachedBackend::replay(open(p)?)),
            ("replay", None) => return Err(Failure::invalid("replay backend requires cache_path")),
            (other, _) => return Err(Failure::invalid(format!("unsupported backend {other:?}"))),
        };
        let prompts = PromptBuilder::from_corpus(corpus).unwrap_or_else(|_| PromptBuilder::bundled());
        let run = Extractor::new(prompts)
            .extract(&entry.document, setting, backend.as_ref(), source)
            .map_err(|e| match e {
                pex_core::pipeline::PipelineError::Backend { .. } => Failure(PexStatus::BackendError, e.to_string()),
                other => Failure::data(other),
            })?;
        give_string(out, run.model.to_json())
    })
}

/// Scores model JSON against the corpus gold standard and returns the
/// report JSON. Either model may be null, not both. The bundled alias list
/// is used for phrase matching.
///
/// # Safety
/// String arguments must be null or nul-terminated; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pex_evaluate(
    corpus: *const PexCorpus,
    ex_model_json: *const c_char,
    gs_model_json: *const c_char,
    out: *mut *mut c_char,
) -> PexStatus {
    guard(|| {
        let corpus = corpus_ref(corpus)?;
        let load = |s: Option<&str>| s.map(WorldModel::from_json).transpose().map_err(Failure::data);
        let ex = load(opt_str(ex_model_json, "ex_model_json")?)?;
        let gs = load(opt_str(gs_model_json, "gs_model_json")?)?;
        let doc_id = ex
            .as_ref()
            .or(gs.as_ref())
            .map(|m| m.doc_id().to_string())
            .ok_or_else(|| Failure::invalid("both models are null"))?;
        let entry = corpus
            .get(&doc_id)
            .ok_or_else(|| Failure::data(format!("document {doc_id} is not in the corpus")))?;
        let scores =
            score_document(&entry.gold, ex.as_ref(), gs.as_ref(), &MatchConfig::bundled()).map_err(Failure::data)?;
        let report = EvalReport::new(Setting::Raw, vec![scores]);
        give_string(out, serde_json::to_string(&report).expect("report serializes"))
    })
}

/// Derives directly-follows pairs between activity nodes.
///
/// `kinds[i]` is 0 for an activity, 1 gateway, 2 condition, 3 other.
/// `edges` holds `n_edges` (source, target) pairs flattened. The result is a
/// JSON array of `[source, target]` node-index pairs.
///
/// # Safety
/// `kinds` must point to `n_nodes` bytes and `edges` to `2 * n_edges` values
/// (either may be null when its count is 0); `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pex_derive_follows(
    kinds: *const u8,
    n_nodes: usize,
    edges: *const usize,
    n_edges: usize,
    out: *mut *mut c_char,
) -> PexStatus {
    guard(|| {
        let slice = |p: *const u8, n: usize, name: &str| -> Result<&[u8], Failure> {
            match (p.is_null(), n) {
                (_, 0) => Ok(&[]),
                (true, _) => Err(Failure::invalid(format!("{name} is null"))),
                (false, n) => Ok(std::slice::from_raw_parts(p, n)),
            }
        };
        let kinds = slice(kinds, n_nodes, "kinds")?
            .iter()
            .map(|&k| match k {
                0 => Ok(NodeKind::Activity),
                1 => Ok(NodeKind::Gateway),
                2 => Ok(NodeKind::Condition),
                3 => Ok(NodeKind::Other),
                k => Err(Failure::invalid(format!("unknown node kind {k}"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let flat: &[usize] = match (edges.is_null(), n_edges) {
            (_, 0) => &[],
            (true, _) => return Err(Failure::invalid("edges is null")),
            (false, n) => std::slice::from_raw_parts(edges, 2 * n),
        };
        let pairs: Vec<(usize, usize)> = flat.chunks_exact(2).map(|c| (c[0], c[1])).collect();
        let graph = RawBehaviorGraph::new(kinds, &pairs).map_err(|e| Failure::invalid(e.to_string()))?;
        let follows: Vec<[usize; 2]> = derive_follows(&graph).into_iter().map(|(a, b)| [a, b]).collect();
        give_string(out, serde_json::to_string(&follows).expect("pairs serialize"))
    })
}
