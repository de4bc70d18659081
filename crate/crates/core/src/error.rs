use std::path::PathBuf;
use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an argument or a configuration field does not hold.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Every stored neighbor pair is coincident, so the affinity scale is zero.
    #[error("degenerate embedding set: all neighbor distances are zero")]
    DegenerateEmbeddings,

    /// Inter-cluster affinity needs at least two clusters.
    #[error("inter-cluster affinity undefined for {0} cluster(s)")]
    InterAffinityUndefined(usize),

    /// All inter-cluster affinities are zero, so the affinity ratio is undefined.
    #[error("disconnected clustering: mean inter-cluster affinity is zero")]
    DisconnectedClustering,

    /// No cluster count inside the search interval has a defined affinity ratio.
    #[error("no valid convergence point with cluster count in [{nc_min}, {nc_max}]")]
    NoConvergencePoint { nc_min: usize, nc_max: usize },

    /// Training produced a non-finite loss.
    #[error("divergence: non-finite training loss at iteration {iteration}")]
    Divergence { iteration: usize },

    /// A parameter file is malformed.
    #[error("corrupt parameter file at byte {offset}: {detail}")]
    CorruptParams { offset: u64, detail: String },

    /// A parameter file was written with an unsupported format version.
    #[error("parameter file version {found} not supported (expected {expected})")]
    ParamsVersion { found: u32, expected: u32 },

    /// WAV decoding failed or the encoding is unsupported.
    #[error("wav {}: {detail}", path.display())]
    Wav { path: PathBuf, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    /// A CSV file failed to parse.
    #[error("csv {}:{line}: {detail}", path.display())]
    Csv {
        path: PathBuf,
        line: usize,
        detail: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
