//! C ABI over `ghost-core`.
//!
//! Engines are opaque handles. Every fallible call returns a [`GhostStatus`];
//! on failure the message is available from [`ghost_last_error`] on the same
//! thread. Strings in and out are NUL-terminated UTF-8.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use ghost_core::engine::{Engine, ModelKind, SuggestRequest};
use ghost_core::ngram::search::StopPolicy;
use ghost_core::{Error, Source};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GhostStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Io = 4,
    Format = 5,
    ModelNotLoaded = 6,
    FingerprintMismatch = 7,
    Internal = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GhostModel {
    Mpc = 0,
    Mpcpp = 1,
    Qb = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GhostStop {
    None = 0,
    /// `stop_value` is the word budget.
    MaxWords = 1,
    /// `stop_value` is the entropy threshold in nats.
    Entropy = 2,
}

/// Loaded indices. Immutable once opened, so one handle may serve
/// concurrent `ghost_suggest` calls.
pub struct GhostEngine {
    engine: Engine,
    fingerprint: Option<CString>,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GhostRequest {
    pub prefix: *const c_char,
    /// Earlier turns, oldest first. May be NULL when `context_len` is 0.
    pub context: *const *const c_char,
    pub context_len: usize,
    pub model: GhostModel,
    pub rerank: bool,
    pub stop: GhostStop,
    pub stop_value: f64,
    pub has_min_confidence: bool,
    pub min_confidence: f64,
}

/// Filled by `ghost_suggest`; release with `ghost_suggestion_clear`.
#[repr(C)]
#[derive(Debug)]
pub struct GhostSuggestion {
    /// Empty on abstention.
    pub text: *mut c_char,
    /// Negative infinity on abstention.
    pub score: f64,
    pub shown: bool,
    /// Static string, never freed.
    pub source: *const c_char,
    /// NULL unless the engine abstained.
    pub abstain_reason: *mut c_char,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> GhostStatus {
    match e {
        Error::Io { .. } | Error::EmptyCorpus(_) => GhostStatus::Io,
        Error::Parse { .. } | Error::Format(_) => GhostStatus::Format,
        Error::InvalidArgument(_) | Error::UnknownCharacter { .. } => GhostStatus::InvalidArgument,
        Error::ModelNotLoaded(_) => GhostStatus::ModelNotLoaded,
        Error::FingerprintMismatch { .. } => GhostStatus::FingerprintMismatch,
    }
}

fn fail(status: GhostStatus, msg: impl Into<String>) -> GhostStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> GhostStatus) -> GhostStatus {
    clear_error();
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(GhostStatus::Internal, "panic inside ghost"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, GhostStatus> {
    if p.is_null() {
        return Err(fail(GhostStatus::NullPointer, format!("{what} is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(GhostStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

fn owned_cstring(s: &str) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map_or(ptr::null_mut(), CString::into_raw)
}

fn source_name(s: Source) -> &'static CStr {
    match s {
        Source::Mpc => c"MPC",
        Source::Mpcpp => c"MPCPP",
        Source::Qb => c"QB",
        Source::Reranked => c"RERANKED",
    }
}

impl From<GhostModel> for ModelKind {
    fn from(m: GhostModel) -> Self {
        match m {
            GhostModel::Mpc => ModelKind::Mpc,
            GhostModel::Mpcpp => ModelKind::Mpcpp,
            GhostModel::Qb => ModelKind::Qb,
        }
    }
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn ghost_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or NULL. Valid until
/// the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn ghost_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Loads index files (or directories of `*.ghst` files) into a new engine.
///
/// # Safety
/// `paths` must point to `n_paths` valid NUL-terminated strings and `out`
/// must be a valid pointer. On success `*out` owns an engine that must be
/// released with [`ghost_engine_free`].
#[no_mangle]
pub unsafe extern "C" fn ghost_engine_open(
    paths: *const *const c_char,
    n_paths: usize,
    out: *mut *mut GhostEngine,
) -> GhostStatus {
    guard(|| {
        if out.is_null() || (paths.is_null() && n_paths > 0) {
            return fail(GhostStatus::NullPointer, "NULL argument");
        }
        *out = ptr::null_mut();
        let mut list = Vec::with_capacity(n_paths);
        for i in 0..n_paths {
            match str_arg(*paths.add(i), "path") {
                Ok(s) => list.push(PathBuf::from(s)),
                Err(st) => return st,
            }
        }
        match Engine::load(&list) {
            Ok(engine) => {
                let fingerprint = engine.fingerprint().and_then(|f| CString::new(f).ok());
                *out = Box::into_raw(Box::new(GhostEngine { engine, fingerprint }));
                GhostStatus::Ok
            }
            Err(e) => fail(status_of(&e), e.to_string()),
        }
    })
}

/// # Safety
/// `engine` must come from [`ghost_engine_open`] and not have been freed.
/// NULL is accepted and ignored.
#[no_mangle]
pub unsafe extern "C" fn ghost_engine_free(engine: *mut GhostEngine) {
    if engine.is_null() {
        return;
    }
    drop(Box::from_raw(engine));
}

/// # Safety
/// `engine` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ghost_engine_has_model(engine: *const GhostEngine, model: GhostModel) -> bool {
    engine.as_ref().is_some_and(|e| e.engine.has_model(model.into()))
}

/// # Safety
/// `engine` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ghost_engine_can_rerank(engine: *const GhostEngine) -> bool {
    engine.as_ref().is_some_and(|e| e.engine.can_rerank())
}

/// Training-corpus fingerprint shared by the loaded indices, or NULL when
/// nothing is loaded. Owned by the engine.
///
/// # Safety
/// `engine` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ghost_engine_fingerprint(engine: *const GhostEngine) -> *const c_char {
    engine
        .as_ref()
        .and_then(|e| e.fingerprint.as_ref())
        .map_or(ptr::null(), |s| s.as_ptr())
}

unsafe fn read_request(req: &GhostRequest) -> Result<SuggestRequest, GhostStatus> {
    let prefix = str_arg(req.prefix, "prefix")?;
    if req.context.is_null() && req.context_len > 0 {
        return Err(fail(GhostStatus::NullPointer, "context is NULL"));
    }
    let mut context = Vec::with_capacity(req.context_len);
    for i in 0..req.context_len {
        context.push(str_arg(*req.context.add(i), "context turn")?.to_string());
    }
    let stop = match req.stop {
        GhostStop::None => StopPolicy::None,
        GhostStop::Entropy => StopPolicy::Entropy(req.stop_value),
        GhostStop::MaxWords => {
            let t = req.stop_value;
            if t.fract() != 0.0 || !(0.0..=u32::MAX as f64).contains(&t) {
                return Err(fail(
                    GhostStatus::InvalidArgument,
                    format!("word budget {t} is not an integer"),
                ));
            }
            StopPolicy::MaxWords(t as u32)
        }
    };
    let stop = stop.validate().map_err(|e| fail(status_of(&e), e.to_string()))?;
    Ok(SuggestRequest {
        prefix: prefix.to_string(),
        context,
        model: req.model.into(),
        rerank: req.rerank,
        stop,
        min_confidence: req.has_min_confidence.then_some(req.min_confidence),
    })
}

/// Computes one suggestion. An abstention is a successful call with
/// `shown == false`.
///
/// # Safety
/// `engine` must be a live handle, `req` must point to a valid request whose
/// strings are valid for the call, and `out` must be writable. On `GHOST_OK`
/// the caller owns `*out` and must release it with [`ghost_suggestion_clear`].
/// On any other status `*out` is left zeroed.
#[no_mangle]
pub unsafe extern "C" fn ghost_suggest(
    engine: *const GhostEngine,
    req: *const GhostRequest,
    out: *mut GhostSuggestion,
) -> GhostStatus {
    guard(|| {
        let (Some(engine), Some(req)) = (engine.as_ref(), req.as_ref()) else {
            return fail(GhostStatus::NullPointer, "NULL argument");
        };
        if out.is_null() {
            return fail(GhostStatus::NullPointer, "NULL argument");
        }
        out.write(GhostSuggestion {
            text: ptr::null_mut(),
            score: f64::NEG_INFINITY,
            shown: false,
            source: ptr::null(),
            abstain_reason: ptr::null_mut(),
        });
        let request = match read_request(req) {
            Ok(r) => r,
            Err(st) => return st,
        };
        match engine.engine.suggest(&request) {
            Ok(s) => {
                out.write(GhostSuggestion {
                    text: owned_cstring(&s.text),
                    score: s.score,
                    shown: s.is_shown(),
                    source: source_name(s.source).as_ptr(),
                    abstain_reason: s.abstain_reason.as_deref().map_or(ptr::null_mut(), owned_cstring),
                });
                GhostStatus::Ok
            }
            Err(e) => fail(status_of(&e), e.to_string()),
        }
    })
}

/// Frees the strings owned by a suggestion and zeroes it. Safe to call twice.
///
/// # Safety
/// `s` must be NULL or point to a suggestion filled by [`ghost_suggest`].
#[no_mangle]
pub unsafe extern "C" fn ghost_suggestion_clear(s: *mut GhostSuggestion) {
    let Some(s) = s.as_mut() else { return };
    for p in [&mut s.text, &mut s.abstain_reason] {
        if !p.is_null() {
            drop(CString::from_raw(*p));
            *p = ptr::null_mut();
        }
    }
    s.source = ptr::null();
    s.shown = false;
    s.score = f64::NEG_INFINITY;
}
