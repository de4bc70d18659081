//! Exercises the C entry points from Rust, including the failure paths.

use std::ffi::{CStr, CString};
use std::ptr;

use scenecluster::features::{extract_lms, AudioSignal, LmsConfig};
use scenecluster::joint::{run_fixed_features, JointConfig};
use scenecluster::metrics::{clustering_accuracy, nmi};
use scenecluster::network::EmbeddingSet;
use scenecluster::synth::{synth_blobs, BlobSpec};
use scenecluster_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(sc_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

fn sine(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 * (2.0 * std::f64::consts::PI * 440.0 * i as f64 / 16000.0).sin())
        .collect()
}

#[test]
fn lms_extraction_matches_direct_call() {
    let samples = sine(4000);
    let mut handle: *mut ScLms = ptr::null_mut();
    let status = unsafe {
        sc_lms_extract(samples.as_ptr(), samples.len(), 16000, ptr::null(), &mut handle)
    };
    assert_eq!(status, ScStatus::Ok);
    assert!(!handle.is_null());

    let direct = extract_lms(
        &AudioSignal { samples, sample_rate: 16000 },
        &LmsConfig::default(),
    )
    .unwrap();
    assert_eq!(sc_lms_bands(handle.cast_const()), direct.n_bands());
    assert_eq!(sc_lms_frames(handle.cast_const()), direct.n_frames());

    let mut values = vec![0.0; direct.n_bands() * direct.n_frames()];
    let status = unsafe { sc_lms_values(handle.cast_const(), values.as_mut_ptr(), values.len()) };
    assert_eq!(status, ScStatus::Ok);
    assert_eq!(values, direct.values.data());

    let status = unsafe { sc_lms_values(handle.cast_const(), values.as_mut_ptr(), 3) };
    assert_eq!(status, ScStatus::InvalidInput);
    assert!(last_error().contains("buffer holds 3"));

    unsafe { sc_lms_free(handle) };
}

#[test]
fn lms_extraction_accepts_config_json() {
    let samples = sine(4000);
    let config = CString::new(r#"{"n_mel": 12}"#).unwrap();
    let mut handle: *mut ScLms = ptr::null_mut();
    let status = unsafe {
        sc_lms_extract(samples.as_ptr(), samples.len(), 16000, config.as_ptr(), &mut handle)
    };
    assert_eq!(status, ScStatus::Ok);
    assert_eq!(sc_lms_bands(handle.cast_const()), 12);
    unsafe { sc_lms_free(handle) };
}

#[test]
fn lms_extraction_reports_failures() {
    let samples = sine(4000);
    let mut handle: *mut ScLms = ptr::null_mut();

    let status = unsafe {
        sc_lms_extract(ptr::null(), 0, 16000, ptr::null(), &mut handle)
    };
    assert_eq!(status, ScStatus::NullPointer);
    assert!(last_error().contains("non-null"));

    let bad = CString::new("{ not json").unwrap();
    let status = unsafe {
        sc_lms_extract(samples.as_ptr(), samples.len(), 16000, bad.as_ptr(), &mut handle)
    };
    assert_eq!(status, ScStatus::InvalidInput);
    assert!(last_error().contains("parse"));

    let status = unsafe {
        sc_lms_extract(samples.as_ptr(), samples.len(), 0, ptr::null(), &mut handle)
    };
    assert_eq!(status, ScStatus::InvalidInput);
    assert!(last_error().contains("sample rate"));
    assert!(handle.is_null(), "failed calls must not hand out a feature");
}

#[test]
fn clustering_matches_direct_call_and_scores_perfectly() {
    let (features, truth) = synth_blobs(&BlobSpec {
        n_clusters: 3,
        per_cluster: 8,
        dim: 4,
        separation: 8.0,
        seed: 5,
    })
    .unwrap();
    let config = CString::new(r#"{"k_s": 10, "nc_min": 2, "nc_max": 8}"#).unwrap();
    let mut handle: *mut ScResult = ptr::null_mut();
    let status = unsafe {
        sc_cluster_fixed(
            features.data().as_ptr(),
            features.rows(),
            features.cols(),
            config.as_ptr(),
            &mut handle,
        )
    };
    assert_eq!(status, ScStatus::Ok);
    assert_eq!(sc_result_n_clusters(handle.cast_const()), 3);
    assert_eq!(sc_result_n_items(handle.cast_const()), 24);

    let mut labels = vec![0usize; 24];
    let status =
        unsafe { sc_result_labels(handle.cast_const(), labels.as_mut_ptr(), labels.len()) };
    assert_eq!(status, ScStatus::Ok);

    let direct = run_fixed_features(
        &EmbeddingSet::new(features).unwrap(),
        &JointConfig { k_s: 10, nc_min: 2, nc_max: 8, ..JointConfig::default() },
    )
    .unwrap();
    assert_eq!(labels, direct.labels);
    assert_eq!(sc_result_gamma(handle.cast_const()), direct.gamma);

    let mut score = 0.0;
    let status =
        unsafe { sc_nmi(labels.as_ptr(), truth.as_ptr(), labels.len(), &mut score) };
    assert_eq!(status, ScStatus::Ok);
    assert!((score - nmi(&labels, &truth).unwrap()).abs() < 1e-15);
    assert!((score - 1.0).abs() < 1e-12);

    let status = unsafe {
        sc_clustering_accuracy(labels.as_ptr(), truth.as_ptr(), labels.len(), &mut score)
    };
    assert_eq!(status, ScStatus::Ok);
    assert!((score - clustering_accuracy(&labels, &truth).unwrap()).abs() < 1e-15);

    unsafe { sc_result_free(handle) };
}

#[test]
fn clustering_failures_map_to_statuses() {
    let mut handle: *mut ScResult = ptr::null_mut();

    let status =
        unsafe { sc_cluster_fixed(ptr::null(), 4, 2, ptr::null(), &mut handle) };
    assert_eq!(status, ScStatus::NullPointer);

    // Too few items for the default interval.
    let flat = vec![0.0; 8];
    let status = unsafe { sc_cluster_fixed(flat.as_ptr(), 4, 2, ptr::null(), &mut handle) };
    assert_eq!(status, ScStatus::InvalidInput);
    assert!(last_error().contains("nc_max"));

    // Coincident points leave the affinity scale undefined.
    let coincident = vec![1.0; 24 * 2];
    let config = CString::new(r#"{"k_s": 3}"#).unwrap();
    let status =
        unsafe { sc_cluster_fixed(coincident.as_ptr(), 24, 2, config.as_ptr(), &mut handle) };
    assert_eq!(status, ScStatus::RuntimeError);
    assert!(last_error().contains("degenerate"));
    assert!(handle.is_null());
}

#[test]
fn metric_calls_validate_arguments() {
    let a = [0usize, 1, 0, 1];
    let mut score = 0.0;
    let status = unsafe { sc_nmi(a.as_ptr(), ptr::null(), 4, &mut score) };
    assert_eq!(status, ScStatus::NullPointer);

    let status = unsafe { sc_nmi(a.as_ptr(), a.as_ptr(), 0, &mut score) };
    assert_eq!(status, ScStatus::InvalidInput);
}

#[test]
fn null_handles_degrade_gracefully() {
    assert_eq!(sc_result_n_clusters(ptr::null()), 0);
    assert_eq!(sc_result_n_items(ptr::null()), 0);
    assert!(sc_result_gamma(ptr::null()).is_nan());
    assert_eq!(sc_lms_bands(ptr::null()), 0);
    assert_eq!(sc_lms_frames(ptr::null()), 0);
    unsafe {
        sc_lms_free(ptr::null_mut());
        sc_result_free(ptr::null_mut());
    }
}

#[test]
fn generated_header_declares_the_interface() {
    let header = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/include/scenecluster.h"
    ))
    .expect("build script should generate the header");
    for symbol in [
        "typedef enum ScStatus",
        "typedef struct ScLms ScLms;",
        "typedef struct ScResult ScResult;",
        "sc_last_error_message",
        "sc_lms_extract",
        "sc_lms_values",
        "sc_cluster_fixed",
        "sc_result_labels",
        "sc_nmi",
        "sc_clustering_accuracy",
        "SC_STATUS_NO_CONVERGENCE",
    ] {
        assert!(header.contains(symbol), "header is missing {symbol}");
    }
}
