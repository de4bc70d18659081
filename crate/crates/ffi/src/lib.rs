//! C interface to the scenecluster library.
//!
//! Handles are opaque and owned by the caller once returned; every `sc_*_free`
//! accepts null. Functions never unwind across the boundary; failures come
//! back as an [`ScStatus`] code with a per-thread message readable through
//! [`sc_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use scenecluster::features::{extract_lms, AudioSignal, LmsConfig, LmsFeature};
use scenecluster::joint::{run_fixed_features, ClusteringResult, JointConfig};
use scenecluster::metrics::{clustering_accuracy, nmi};
use scenecluster::network::EmbeddingSet;
use scenecluster::{Error, Matrix};

/// Outcome of every fallible call in this interface.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    Utf8Error = 2,
    /// Arguments or configuration violate a precondition.
    InvalidInput = 3,
    /// No cluster count in the search interval has a defined affinity ratio.
    NoConvergence = 4,
    /// Any other library failure; details via sc_last_error_message.
    RuntimeError = 5,
    /// The library panicked; state is still consistent but the call did nothing.
    Panic = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_last_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap();
    });
}

fn fail(status: ScStatus, message: &str) -> ScStatus {
    set_last_error(message);
    status
}

fn error_status(e: &Error) -> ScStatus {
    match e {
        Error::InvalidInput(_) => ScStatus::InvalidInput,
        Error::NoConvergencePoint { .. } => ScStatus::NoConvergence,
        _ => ScStatus::RuntimeError,
    }
}

fn guard(body: impl FnOnce() -> ScStatus) -> ScStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(ScStatus::Panic, &message)
        }
    }
}

/// Message describing this thread's most recent failure. The pointer stays
/// valid until the next failing call on the same thread; never freed by the
/// caller.
#[no_mangle]
pub extern "C" fn sc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

unsafe fn parse_config<T: serde::de::DeserializeOwned + Default>(
    json: *const c_char,
) -> Result<T, ScStatus> {
    if json.is_null() {
        return Ok(T::default());
    }
    let text = CStr::from_ptr(json)
        .to_str()
        .map_err(|e| fail(ScStatus::Utf8Error, &format!("config is not UTF-8: {e}")))?;
    serde_json::from_str(text)
        .map_err(|e| fail(ScStatus::InvalidInput, &format!("config does not parse: {e}")))
}

/// An extracted log mel spectrogram.
pub struct ScLms {
    feature: LmsFeature,
}

/// A finished clustering run.
pub struct ScResult {
    result: ClusteringResult,
}

/// Compute the log mel spectrogram of a mono signal.
///
/// `config_json` is an optional UTF-8 JSON object with the same fields as the
/// library's feature configuration; null means defaults. On success `*out`
/// owns the feature and must be released with [`sc_lms_free`].
///
/// # Safety
/// `samples` must point to `n_samples` readable doubles and `out` to a
/// writable pointer slot; `config_json`, when non-null, must be a
/// NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sc_lms_extract(
    samples: *const f64,
    n_samples: usize,
    sample_rate: u32,
    config_json: *const c_char,
    out: *mut *mut ScLms,
) -> ScStatus {
    guard(|| {
        if samples.is_null() || out.is_null() {
            return fail(ScStatus::NullPointer, "samples and out must be non-null");
        }
        let cfg: LmsConfig = match parse_config(config_json) {
            Ok(cfg) => cfg,
            Err(status) => return status,
        };
        let signal = AudioSignal {
            samples: slice::from_raw_parts(samples, n_samples).to_vec(),
            sample_rate,
        };
        match extract_lms(&signal, &cfg) {
            Ok(feature) => {
                *out = Box::into_raw(Box::new(ScLms { feature }));
                ScStatus::Ok
            }
            Err(e) => fail(error_status(&e), &e.to_string()),
        }
    })
}

/// Number of mel bands of an extracted feature; 0 for null.
#[no_mangle]
pub extern "C" fn sc_lms_bands(lms: *const ScLms) -> usize {
    if lms.is_null() {
        return 0;
    }
    unsafe { (*lms).feature.n_bands() }
}

/// Number of frames of an extracted feature; 0 for null.
#[no_mangle]
pub extern "C" fn sc_lms_frames(lms: *const ScLms) -> usize {
    if lms.is_null() {
        return 0;
    }
    unsafe { (*lms).feature.n_frames() }
}

/// Copy the feature values into `buf` in band-major order. `len` must be
/// exactly bands * frames.
///
/// # Safety
/// `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn sc_lms_values(lms: *const ScLms, buf: *mut f64, len: usize) -> ScStatus {
    guard(|| {
        if lms.is_null() || buf.is_null() {
            return fail(ScStatus::NullPointer, "lms and buf must be non-null");
        }
        let values = (*lms).feature.values.data();
        if len != values.len() {
            return fail(
                ScStatus::InvalidInput,
                &format!("buffer holds {len} values, the feature has {}", values.len()),
            );
        }
        slice::from_raw_parts_mut(buf, len).copy_from_slice(values);
        ScStatus::Ok
    })
}

/// Release an extracted feature. Null is ignored.
///
/// # Safety
/// `lms` must be null or a pointer obtained from [`sc_lms_extract`] that has
/// not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn sc_lms_free(lms: *mut ScLms) {
    if !lms.is_null() {
        drop(Box::from_raw(lms));
    }
}

/// Cluster `n_items` feature vectors of width `dim`, laid out row-major.
///
/// `config_json` is an optional UTF-8 JSON object with the same fields as the
/// library's joint configuration (neighbor count, cluster-count interval,
/// seed, ...); null means defaults. Vectors are clustered as given, no
/// network training happens. On success `*out` owns the result and must be
/// released with [`sc_result_free`].
///
/// # Safety
/// `vectors` must point to `n_items * dim` readable doubles and `out` to a
/// writable pointer slot; `config_json`, when non-null, must be a
/// NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sc_cluster_fixed(
    vectors: *const f64,
    n_items: usize,
    dim: usize,
    config_json: *const c_char,
    out: *mut *mut ScResult,
) -> ScStatus {
    guard(|| {
        if vectors.is_null() || out.is_null() {
            return fail(ScStatus::NullPointer, "vectors and out must be non-null");
        }
        let cfg: JointConfig = match parse_config(config_json) {
            Ok(cfg) => cfg,
            Err(status) => return status,
        };
        let Some(total) = n_items.checked_mul(dim) else {
            return fail(ScStatus::InvalidInput, "n_items * dim overflows");
        };
        let data = slice::from_raw_parts(vectors, total).to_vec();
        let outcome = Matrix::from_vec(n_items, dim, data)
            .and_then(EmbeddingSet::new)
            .and_then(|x| run_fixed_features(&x, &cfg));
        match outcome {
            Ok(result) => {
                *out = Box::into_raw(Box::new(ScResult { result }));
                ScStatus::Ok
            }
            Err(e) => fail(error_status(&e), &e.to_string()),
        }
    })
}

/// Selected cluster count; 0 for null.
#[no_mangle]
pub extern "C" fn sc_result_n_clusters(result: *const ScResult) -> usize {
    if result.is_null() {
        return 0;
    }
    unsafe { (*result).result.n_clusters }
}

/// Number of clustered items; 0 for null.
#[no_mangle]
pub extern "C" fn sc_result_n_items(result: *const ScResult) -> usize {
    if result.is_null() {
        return 0;
    }
    unsafe { (*result).result.labels.len() }
}

/// Affinity ratio at the selected point; NaN for null.
#[no_mangle]
pub extern "C" fn sc_result_gamma(result: *const ScResult) -> f64 {
    if result.is_null() {
        return f64::NAN;
    }
    unsafe { (*result).result.gamma }
}

/// Copy the item labels into `buf`. `len` must be exactly the item count;
/// labels are dense in [0, n_clusters).
///
/// # Safety
/// `buf` must point to `len` writable size_t slots.
#[no_mangle]
pub unsafe extern "C" fn sc_result_labels(
    result: *const ScResult,
    buf: *mut usize,
    len: usize,
) -> ScStatus {
    guard(|| {
        if result.is_null() || buf.is_null() {
            return fail(ScStatus::NullPointer, "result and buf must be non-null");
        }
        let labels = &(*result).result.labels;
        if len != labels.len() {
            return fail(
                ScStatus::InvalidInput,
                &format!("buffer holds {len} labels, the result has {}", labels.len()),
            );
        }
        slice::from_raw_parts_mut(buf, len).copy_from_slice(labels);
        ScStatus::Ok
    })
}

/// Release a clustering result. Null is ignored.
///
/// # Safety
/// `result` must be null or a pointer obtained from [`sc_cluster_fixed`] that
/// has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn sc_result_free(result: *mut ScResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

unsafe fn score_pair(
    pred: *const usize,
    truth: *const usize,
    n: usize,
    out: *mut f64,
    score: impl Fn(&[usize], &[usize]) -> scenecluster::Result<f64>,
) -> ScStatus {
    if pred.is_null() || truth.is_null() || out.is_null() {
        return fail(ScStatus::NullPointer, "pred, truth and out must be non-null");
    }
    let p = slice::from_raw_parts(pred, n);
    let t = slice::from_raw_parts(truth, n);
    match score(p, t) {
        Ok(v) => {
            *out = v;
            ScStatus::Ok
        }
        Err(e) => fail(error_status(&e), &e.to_string()),
    }
}

/// Normalized mutual information between two labelings of `n` items.
///
/// # Safety
/// `pred` and `truth` must point to `n` readable size_t labels and `out` to a
/// writable double.
#[no_mangle]
pub unsafe extern "C" fn sc_nmi(
    pred: *const usize,
    truth: *const usize,
    n: usize,
    out: *mut f64,
) -> ScStatus {
    guard(|| score_pair(pred, truth, n, out, |p, t| nmi(p, t)))
}

/// Clustering accuracy under the best cluster-to-class mapping.
///
/// # Safety
/// `pred` and `truth` must point to `n` readable size_t labels and `out` to a
/// writable double.
#[no_mangle]
pub unsafe extern "C" fn sc_clustering_accuracy(
    pred: *const usize,
    truth: *const usize,
    n: usize,
    out: *mut f64,
) -> ScStatus {
    guard(|| score_pair(pred, truth, n, out, |p, t| clustering_accuracy(p, t)))
}
