//! Joint deep-embedding learning and agglomerative clustering for audio.
//!
//! The pipeline turns recordings into log mel spectrograms, trains a small
//! convolutional encoder on its own evolving cluster assignments, merges
//! clusters greedily by graph-based affinity, and picks the cluster count
//! where the intra/inter affinity ratio peaks.

pub mod affinity;
pub mod agglomerate;
pub mod config;
pub mod dataset;
pub mod error;
pub mod features;
pub mod joint;
pub mod matrix;
pub mod metrics;
pub mod network;
pub mod synth;

pub use error::{Error, Result};
pub use matrix::Matrix;
