//! C ABI for loading trained models and generating embeddings from other
//! languages. Handles are opaque pointers; every function returns an error
//! code and the last error message is available per thread.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::path::PathBuf;
use std::ptr;

use flyhash::corpus::{encode_wgram, tokenize, WGram};
use flyhash::error::Error;
use flyhash::eval::binary_similarity;
use flyhash::model::{hash, static_embedding, Model};

/// Opaque handle to a loaded model.
pub struct FlyhashModel {
    inner: Model,
}

/// Status codes returned by all fallible functions.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlyhashStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    LoadFailed = 3,
    WordNotFound = 4,
    InvalidConfig = 5,
    BufferTooSmall = 6,
    InternalError = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| {
        *e.borrow_mut() = CString::new(msg).ok();
    });
}

fn status_from(err: &Error) -> FlyhashStatus {
    match err {
        Error::BadMagic
        | Error::UnsupportedVersion(_)
        | Error::Truncated
        | Error::ChecksumMismatch
        | Error::Io(_) => FlyhashStatus::LoadFailed,
        Error::Config(_) | Error::IdOutOfRange { .. } => FlyhashStatus::InvalidConfig,
        _ => FlyhashStatus::InternalError,
    }
}

/// Returns the last error message for this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn flyhash_last_error() -> *const c_char {
    LAST_ERROR.with(|e| {
        e.borrow()
            .as_ref()
            .map_or(ptr::null(), |s| s.as_ptr())
    })
}

/// Loads a model file. On success writes a handle through `out` which must
/// be released with `flyhash_model_free`.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn flyhash_model_load(
    path: *const c_char,
    out: *mut *mut FlyhashModel,
) -> FlyhashStatus {
    if path.is_null() || out.is_null() {
        return FlyhashStatus::NullArgument;
    }
    let Ok(path) = CStr::from_ptr(path).to_str() else {
        return FlyhashStatus::InvalidUtf8;
    };
    match Model::load(PathBuf::from(path)) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(FlyhashModel { inner }));
            FlyhashStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            status_from(&e)
        }
    }
}

/// Releases a model handle. Null is a no-op.
///
/// # Safety
/// `model` must have come from `flyhash_model_load` and not been freed.
#[no_mangle]
pub unsafe extern "C" fn flyhash_model_free(model: *mut FlyhashModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of Kenyon-cell units (hash code length in bits).
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn flyhash_model_units(model: *const FlyhashModel) -> c_int {
    if model.is_null() {
        return -1;
    }
    (*model).inner.weights.k_units() as c_int
}

/// Vocabulary size.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn flyhash_model_vocab_size(model: *const FlyhashModel) -> c_int {
    if model.is_null() {
        return -1;
    }
    (*model).inner.vocab.len() as c_int
}

unsafe fn write_code(
    code: &flyhash::model::HashCode,
    out_units: *mut u32,
    capacity: usize,
) -> FlyhashStatus {
    if code.cardinality() > capacity {
        set_error(format!(
            "buffer holds {capacity} entries, need {}",
            code.cardinality()
        ));
        return FlyhashStatus::BufferTooSmall;
    }
    for (i, &u) in code.ones().iter().enumerate() {
        *out_units.add(i) = u;
    }
    FlyhashStatus::Ok
}

/// Static embedding of a single word: writes the `k` active unit indices
/// (ascending) into `out_units`, which must hold at least `k` entries.
///
/// # Safety
/// `model`, `word`, and `out_units` must be valid; `out_units` must have
/// room for `k` values.
#[no_mangle]
pub unsafe extern "C" fn flyhash_static_embedding(
    model: *const FlyhashModel,
    word: *const c_char,
    k: usize,
    out_units: *mut u32,
) -> FlyhashStatus {
    if model.is_null() || word.is_null() || out_units.is_null() {
        return FlyhashStatus::NullArgument;
    }
    let m = &(*model).inner;
    let Ok(word) = CStr::from_ptr(word).to_str() else {
        return FlyhashStatus::InvalidUtf8;
    };
    let Some(id) = m.vocab.id_of(&word.to_lowercase()) else {
        set_error(format!("word '{word}' not in vocabulary"));
        return FlyhashStatus::WordNotFound;
    };
    match static_embedding(&m.weights, id, k) {
        Ok(code) => write_code(&code, out_units, k),
        Err(e) => {
            set_error(e.to_string());
            status_from(&e)
        }
    }
}

/// Context-dependent embedding: tokenizes `sentence`, takes the token at
/// `target_index` as the target and the other in-vocabulary tokens as the
/// context, and writes the `k` active unit indices into `out_units`.
///
/// # Safety
/// `model`, `sentence`, and `out_units` must be valid; `out_units` must
/// have room for `k` values.
#[no_mangle]
pub unsafe extern "C" fn flyhash_context_embedding(
    model: *const FlyhashModel,
    sentence: *const c_char,
    target_index: usize,
    k: usize,
    out_units: *mut u32,
) -> FlyhashStatus {
    if model.is_null() || sentence.is_null() || out_units.is_null() {
        return FlyhashStatus::NullArgument;
    }
    let m = &(*model).inner;
    let Ok(sentence) = CStr::from_ptr(sentence).to_str() else {
        return FlyhashStatus::InvalidUtf8;
    };
    let tokens = tokenize(sentence);
    if target_index >= tokens.len() {
        set_error(format!(
            "target index {target_index} out of range for {} tokens",
            tokens.len()
        ));
        return FlyhashStatus::InvalidConfig;
    }
    let Some(target_id) = m.vocab.id_of(&tokens[target_index]) else {
        set_error(format!("target '{}' not in vocabulary", tokens[target_index]));
        return FlyhashStatus::WordNotFound;
    };
    let context_ids = tokens
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != target_index)
        .filter_map(|(_, t)| m.vocab.id_of(t))
        .collect();
    let g = WGram {
        context_ids,
        target_id,
    };
    let sample = match encode_wgram(&g, m.vocab.len()) {
        Ok(s) => s,
        Err(e) => {
            set_error(e.to_string());
            return status_from(&e);
        }
    };
    match hash(&m.weights, &sample, k) {
        Ok(code) => write_code(&code, out_units, k),
        Err(e) => {
            set_error(e.to_string());
            status_from(&e)
        }
    }
}

/// Fraction of matching bits between two codes over `units` total bits.
/// Both arrays list ascending active unit indices. Returns a value in
/// [0, 1], or -1.0 on error.
///
/// # Safety
/// `a` and `b` must point to `a_len` / `b_len` readable entries.
#[no_mangle]
pub unsafe extern "C" fn flyhash_similarity(
    units: u32,
    a: *const u32,
    a_len: usize,
    b: *const u32,
    b_len: usize,
) -> f64 {
    if a.is_null() || b.is_null() {
        return -1.0;
    }
    let a = std::slice::from_raw_parts(a, a_len);
    let b = std::slice::from_raw_parts(b, b_len);
    let ca = flyhash::model::HashCode::new(units, a.to_vec());
    let cb = flyhash::model::HashCode::new(units, b.to_vec());
    binary_similarity(&ca, &cb).unwrap_or(-1.0)
}
