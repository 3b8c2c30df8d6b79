//! Crate-wide error type.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Every failure mode in the library is a typed variant here; nothing panics
/// on malformed input.
#[derive(Debug, Error)]
pub enum Error {
    // ---- mesh / cloud parsing and I/O ----
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("count mismatch: declared {declared} {what}, found {found}")]
    CountMismatch {
        what: &'static str,
        declared: usize,
        found: usize,
    },
    #[error("face index {index} out of range (vertex count {vertex_count})")]
    IndexOutOfRange { index: usize, vertex_count: usize },
    #[error("non-finite coordinate at {what} {index}")]
    NonFiniteCoordinate { what: &'static str, index: usize },
    #[error("unsupported encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("malformed record: {0}")]
    MalformedRecord(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    // ---- geometry ----
    #[error("mesh has zero total surface area")]
    ZeroAreaMesh,
    #[error("degenerate cloud: all points coincide")]
    DegenerateCloud,
    #[error("empty cloud")]
    EmptyCloud,

    // ---- watermarking ----
    #[error("input cloud is not normalized ({0})")]
    NonNormalizedInput(String),
    #[error("too few points: have {have}, need at least {need}")]
    TooFewPoints { have: usize, need: usize },
    #[error("embedding did not converge within {0} iterations")]
    EmbedNonConvergent(usize),
    #[error("watermark length mismatch: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },

    // ---- attacks ----
    #[error("attack would leave zero points")]
    EmptyResult,

    // ---- decoder ----
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("loss diverged (NaN) at epoch {0}")]
    DivergedLoss(usize),
    #[error("malformed checkpoint: {0}")]
    MalformedCheckpoint(String),
    #[error("checkpoint version mismatch: file has {found}, expected {expected}")]
    CheckpointVersion { found: u32, expected: u32 },

    // ---- metrics ----
    #[error("empty score set")]
    EmptyScoreSet,

    // ---- harness ----
    #[error("train/test overlap detected: {0}")]
    OverlapDetected(String),
    #[error("evaluation aborted: {failed} of {total} clouds failed")]
    TooManyFailures { failed: usize, total: usize },

    // ---- configuration ----
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
