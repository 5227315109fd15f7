//! C ABI over the `lmilatt` library.
//!
//! Handles are opaque pointers created by `*_load` and released by the
//! matching `*_free`. Every fallible function returns an [`LmilStatus`]; on
//! failure a description is kept per thread and can be fetched with
//! [`lmil_last_error_message`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use lmilatt::corpus::{hash_embed, load_embedded_corpus, EmbeddedUser, Label};
use lmilatt::evaluation::{evaluate, MetricWarning};
use lmilatt::training::{predict_user, ModelCheckpoint};
use lmilatt::Error;

/// Result codes shared by every function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LmilStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Data = 3,
    Numerical = 4,
    Io = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// A loaded model checkpoint.
pub struct LmilModel {
    inner: ModelCheckpoint,
}

/// A loaded embedded corpus.
pub struct LmilCorpus {
    users: Vec<EmbeddedUser>,
}

/// Confusion counts and metrics. `auc` is NaN when only one class is
/// present. `warnings` has bit 0 set when precision was undefined, bit 1
/// for recall and bit 2 for F1.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LmilMetrics {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: f64,
    pub warnings: u32,
}

struct Failure {
    status: LmilStatus,
    message: String,
}

impl Failure {
    fn new(status: LmilStatus, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn null(name: &str) -> Self {
        Self::new(LmilStatus::NullPointer, format!("`{name}` is null"))
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } => LmilStatus::Io,
            Error::InvalidArgument(_) | Error::Shape { .. } | Error::Dimension { .. } | Error::Config(_) => {
                LmilStatus::InvalidArgument
            }
            Error::NonFinite(_) | Error::GradCheck { .. } => LmilStatus::Numerical,
            _ => LmilStatus::Data,
        };
        Self::new(status, e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> LmilStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LmilStatus::Ok,
        Ok(Err(failure)) => {
            set_last_error(failure.message);
            failure.status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            LmilStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char, name: &str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(Failure::null(name));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(LmilStatus::InvalidArgument, format!("`{name}` is not valid UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut_arg<'a, T>(p: *mut T, len: usize, name: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Failure::null(name));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::null(name))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lmil_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (truncated and
/// always NUL-terminated when `len > 0`). Returns the full message length
/// including the terminator, or 0 when there is no error.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn lmil_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let slot = slot.borrow();
        let Some(msg) = slot.as_ref() else { return 0 };
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n - 1) = 0;
        }
        bytes.len()
    })
}

/// Loads a model checkpoint.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lmil_model_load(path: *const c_char, out: *mut *mut LmilModel) -> LmilStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        let path = path_arg(path, "path")?;
        let inner = ModelCheckpoint::load(&path)?;
        *out = Box::into_raw(Box::new(LmilModel { inner }));
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from [`lmil_model_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lmil_model_free(model: *mut LmilModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Embedding width the model expects.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lmil_model_embedding_dim(model: *const LmilModel, out: *mut usize) -> LmilStatus {
    guard(|| {
        let model = ref_arg(model, "model")?;
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        *out = model.inner.embedding_dim();
        Ok(())
    })
}

/// Loads an embedded corpus (binary or JSON lines).
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lmil_corpus_load(path: *const c_char, out: *mut *mut LmilCorpus) -> LmilStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        let path = path_arg(path, "path")?;
        let users = load_embedded_corpus(&path)?;
        *out = Box::into_raw(Box::new(LmilCorpus { users }));
        Ok(())
    })
}

/// Releases a corpus. Null is ignored.
///
/// # Safety
/// `corpus` must come from [`lmil_corpus_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lmil_corpus_free(corpus: *mut LmilCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// Number of users in a corpus.
///
/// # Safety
/// `corpus` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lmil_corpus_len(corpus: *const LmilCorpus, out: *mut usize) -> LmilStatus {
    guard(|| {
        let corpus = ref_arg(corpus, "corpus")?;
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        *out = corpus.users.len();
        Ok(())
    })
}

/// Scores one user given as `m` row-major embedding rows of width `dim`.
/// Writes the probability and, when `weights` is non-null, the `m`
/// per-tweet weights.
///
/// # Safety
/// `rows` must hold `m * dim` floats; `probability` must be writable;
/// `weights` must be null or hold `m` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn lmil_predict_rows(
    model: *const LmilModel,
    rows: *const f32,
    m: usize,
    dim: usize,
    probability: *mut f64,
    weights: *mut f64,
) -> LmilStatus {
    guard(|| {
        let model = ref_arg(model, "model")?;
        if probability.is_null() {
            return Err(Failure::null("probability"));
        }
        let len = m
            .checked_mul(dim)
            .ok_or_else(|| Failure::new(LmilStatus::InvalidArgument, "m * dim overflows"))?;
        let data = slice_arg(rows, len, "rows")?.to_vec();
        let user = EmbeddedUser::new("ffi", None, dim, data)?;
        let p = predict_user(&model.inner, &user)?;
        *probability = p.probability;
        if !weights.is_null() {
            slice_mut_arg(weights, m, "weights")?.copy_from_slice(&p.weights);
        }
        Ok(())
    })
}

/// Probabilities for every user of `corpus`, in corpus order. `len` is
/// the capacity of `probabilities` and must be at least the corpus size.
///
/// # Safety
/// Handles must be live; `probabilities` must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn lmil_predict_corpus(
    model: *const LmilModel,
    corpus: *const LmilCorpus,
    probabilities: *mut f64,
    len: usize,
) -> LmilStatus {
    guard(|| {
        let model = ref_arg(model, "model")?;
        let corpus = ref_arg(corpus, "corpus")?;
        if len < corpus.users.len() {
            return Err(Failure::new(
                LmilStatus::BufferTooSmall,
                format!("need room for {} probabilities, got {len}", corpus.users.len()),
            ));
        }
        let out = slice_mut_arg(probabilities, corpus.users.len(), "probabilities")?;
        let preds = lmilatt::training::predict_corpus(&model.inner, &corpus.users)?;
        for (o, p) in out.iter_mut().zip(preds) {
            *o = p.probability;
        }
        Ok(())
    })
}

/// Confusion counts, metrics and AUC for `n` scored users with 0/1 truth.
///
/// # Safety
/// `probabilities` and `truth` must hold `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lmil_metrics(
    probabilities: *const f64,
    truth: *const u8,
    n: usize,
    threshold: f64,
    out: *mut LmilMetrics,
) -> LmilStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        let probs = slice_arg(probabilities, n, "probabilities")?;
        let labels = slice_arg(truth, n, "truth")?
            .iter()
            .map(|&b| {
                Label::from_u8(b)
                    .ok_or_else(|| Failure::new(LmilStatus::InvalidArgument, format!("label must be 0 or 1, got {b}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let report = evaluate(probs, &labels, threshold)?;
        let m = &report.metrics;
        let warnings = m.warnings.iter().fold(0u32, |acc, w| {
            acc | match w {
                MetricWarning::PrecisionUndefined => 1,
                MetricWarning::RecallUndefined => 2,
                MetricWarning::F1Undefined => 4,
            }
        });
        *out = LmilMetrics {
            tp: report.counts.tp,
            fp: report.counts.fp,
            fn_: report.counts.fn_,
            tn: report.counts.tn,
            accuracy: m.accuracy,
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            auc: report.auc().unwrap_or(f64::NAN),
            warnings,
        };
        Ok(())
    })
}

/// Deterministic hash embedding of `text` into `dim` floats.
///
/// # Safety
/// `text` must be a NUL-terminated UTF-8 string; `out` must hold `dim`
/// writable floats.
#[no_mangle]
pub unsafe extern "C" fn lmil_hash_embed(text: *const c_char, dim: usize, seed: u64, out: *mut f32) -> LmilStatus {
    guard(|| {
        if text.is_null() {
            return Err(Failure::null("text"));
        }
        if dim == 0 {
            return Err(Failure::new(LmilStatus::InvalidArgument, "dim must be positive"));
        }
        let text = CStr::from_ptr(text)
            .to_str()
            .map_err(|_| Failure::new(LmilStatus::InvalidArgument, "text is not valid UTF-8"))?;
        slice_mut_arg(out, dim, "out")?.copy_from_slice(&hash_embed(text, dim, seed));
        Ok(())
    })
}
