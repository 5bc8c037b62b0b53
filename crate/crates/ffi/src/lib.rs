//! C interface for loading a trained checkpoint and classifying text.
//!
//! Every function returns a [`GcnStatus`]; on failure a description is
//! available from [`gcn_last_error_message`] on the same thread. Models are
//! opaque handles created by [`gcn_model_load`] and released with
//! [`gcn_model_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use gcn_core::model::{gate_activations, load_checkpoint, predict_proba, GcnParams};
use gcn_core::text::{tokenize, EncodedExample, Vocabulary};
use gcn_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GcnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    InvalidCheckpoint = 4,
    VocabMismatch = 5,
    InvalidArgument = 6,
    Unsupported = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

/// A loaded checkpoint and its vocabulary.
pub struct GcnModel {
    params: GcnParams,
    vocab: Vocabulary,
    gate_name: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> GcnStatus {
    match e {
        Error::Io { .. } => GcnStatus::Io,
        Error::MagicMismatch { .. } | Error::UnsupportedVersion(_) | Error::Truncated(_) | Error::Invalid(_) => {
            GcnStatus::InvalidCheckpoint
        }
        Error::Json(_) | Error::Parse { .. } | Error::Validation { .. } => GcnStatus::InvalidCheckpoint,
        Error::Unsupported(_) => GcnStatus::Unsupported,
        _ => GcnStatus::InvalidArgument,
    }
}

/// Runs `f`, recording any error or panic for [`gcn_last_error_message`].
fn guard(f: impl FnOnce() -> Result<(), (GcnStatus, String)>) -> GcnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GcnStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            GcnStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (GcnStatus, String) {
    (status_of(&e), e.to_string())
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (GcnStatus, String)> {
    if p.is_null() {
        return Err((GcnStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (GcnStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn model_ref<'a>(m: *const GcnModel) -> Result<&'a GcnModel, (GcnStatus, String)> {
    m.as_ref().ok_or((GcnStatus::NullPointer, "model handle is null".to_string()))
}

fn null_out() -> (GcnStatus, String) {
    (GcnStatus::NullPointer, "output pointer is null".to_string())
}

/// Loads a checkpoint and the vocabulary it was trained with. On success
/// `*out` receives a handle to free with [`gcn_model_free`].
///
/// # Safety
/// Paths must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gcn_model_load(
    checkpoint_path: *const c_char,
    vocab_path: *const c_char,
    out: *mut *mut GcnModel,
) -> GcnStatus {
    guard(|| {
        if out.is_null() {
            return Err(null_out());
        }
        *out = std::ptr::null_mut();
        let ckpt = c_str(checkpoint_path, "checkpoint path")?;
        let vpath = c_str(vocab_path, "vocabulary path")?;
        let params = load_checkpoint(Path::new(ckpt)).map_err(lib_err)?;
        let vocab = Vocabulary::load(Path::new(vpath)).map_err(lib_err)?;
        if vocab.content_hash() != params.meta.vocab_hash {
            return Err((
                GcnStatus::VocabMismatch,
                format!("{vpath} is not the vocabulary of {ckpt}"),
            ));
        }
        let gate_name = CString::new(params.config.gate.name()).unwrap_or_default();
        *out = Box::into_raw(Box::new(GcnModel {
            params,
            vocab,
            gate_name,
        }));
        Ok(())
    })
}

/// Releases a handle from [`gcn_model_load`]. Null is ignored.
///
/// # Safety
/// `model` must come from [`gcn_model_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gcn_model_free(model: *mut GcnModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

unsafe fn write_prediction(p: f64, out_prob: *mut f64, out_label: *mut u8) {
    if !out_prob.is_null() {
        *out_prob = p;
    }
    if !out_label.is_null() {
        *out_label = u8::from(p >= 0.5);
    }
}

/// Classifies raw text: probability of the positive class and the 0/1 label.
/// Either output pointer may be null.
///
/// # Safety
/// `text` must be a NUL-terminated string; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn gcn_model_predict_text(
    model: *const GcnModel,
    text: *const c_char,
    out_prob: *mut f64,
    out_label: *mut u8,
) -> GcnStatus {
    guard(|| {
        let m = model_ref(model)?;
        let text = c_str(text, "text")?;
        let ex = m.vocab.encode(&tokenize(text), 0, m.params.config.max_len);
        let p = predict_proba(&m.params, &[ex]).map_err(lib_err)?[0];
        write_prediction(p, out_prob, out_label);
        Ok(())
    })
}

/// Classifies a sequence of vocabulary indices (0 is padding). Shorter
/// sequences are padded and longer ones truncated to the model's input length.
///
/// # Safety
/// `indices` must point to `len` readable values.
#[no_mangle]
pub unsafe extern "C" fn gcn_model_predict_indices(
    model: *const GcnModel,
    indices: *const u32,
    len: usize,
    out_prob: *mut f64,
    out_label: *mut u8,
) -> GcnStatus {
    guard(|| {
        let m = model_ref(model)?;
        if indices.is_null() && len > 0 {
            return Err((GcnStatus::NullPointer, "indices is null".into()));
        }
        let src = if len == 0 { &[][..] } else { std::slice::from_raw_parts(indices, len) };
        let n = m.params.config.max_len;
        let rows = m.vocab.rows() as u32;
        if let Some(bad) = src.iter().find(|&&i| i >= rows) {
            return Err((
                GcnStatus::InvalidArgument,
                format!("index {bad} outside vocabulary of {rows} rows"),
            ));
        }
        let mut idx: Vec<u32> = src.iter().take(n).copied().collect();
        idx.resize(n, 0);
        let p = predict_proba(&m.params, &[EncodedExample { indices: idx, label: 0 }]).map_err(lib_err)?[0];
        write_prediction(p, out_prob, out_label);
        Ok(())
    })
}

/// Input length the model pads and truncates to, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gcn_model_max_len(model: *const GcnModel) -> usize {
    model.as_ref().map_or(0, |m| m.params.config.max_len)
}

/// Trainable scalars outside the embedding table, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gcn_model_param_count(model: *const GcnModel) -> usize {
    model.as_ref().map_or(0, |m| m.params.param_count())
}

/// `"glu"`, `"gtu"`, `"gtru"` or `"none"`; null for a null handle. The string
/// lives as long as the model.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gcn_model_gate_kind(model: *const GcnModel) -> *const c_char {
    model.as_ref().map_or(std::ptr::null(), |m| m.gate_name.as_ptr())
}

/// Per-position mean gate activation of convolution branch `branch` for
/// `text`. Writes up to `capacity` values to `out` and the model's input
/// length to `*out_len`; returns `BufferTooSmall` if `capacity` is smaller.
///
/// # Safety
/// `out` must have room for `capacity` values; `out_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gcn_model_gate_means(
    model: *const GcnModel,
    text: *const c_char,
    branch: usize,
    out: *mut f64,
    capacity: usize,
    out_len: *mut usize,
) -> GcnStatus {
    guard(|| {
        let m = model_ref(model)?;
        let text = c_str(text, "text")?;
        if out_len.is_null() || (out.is_null() && capacity > 0) {
            return Err(null_out());
        }
        let maps = gate_activations(&m.params, &m.vocab, &tokenize(text)).map_err(lib_err)?;
        let map = maps.get(branch).ok_or_else(|| {
            (
                GcnStatus::InvalidArgument,
                format!("branch {branch} out of range; model has {}", maps.len()),
            )
        })?;
        *out_len = map.mean.len();
        if capacity < map.mean.len() {
            return Err((
                GcnStatus::BufferTooSmall,
                format!("need room for {} values, got {capacity}", map.mean.len()),
            ));
        }
        std::ptr::copy_nonoverlapping(map.mean.as_ptr(), out, map.mean.len());
        Ok(())
    })
}

/// Message for the most recent failure on this thread; empty if none. Valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gcn_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn gcn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
