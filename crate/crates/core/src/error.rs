use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum GcsError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is rank deficient: |R[{index}][{index}]| = {value:e} below tolerance {tolerance:e}")]
    RankDeficient {
        index: usize,
        value: f64,
        tolerance: f64,
    },

    #[error("columns are not orthonormal: ||Q*Q - I||_F = {defect:e}")]
    NotOrthonormal { defect: f64 },

    #[error("non-finite entry at position {0}")]
    NonFinite(usize),

    #[error("invalid number of measurements m = {m} for n = {n}")]
    InvalidM { m: usize, n: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("network has no biases")]
    NoBiases,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("all sampled chords have norm below {0:e}")]
    DegenerateRange(f64),

    #[error("bad IDX magic number {found:#010x}, expected {expected:#010x}")]
    BadMagic { found: u32, expected: u32 },

    #[error("truncated file: {0}")]
    TruncatedFile(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("non-finite loss {loss} at epoch {epoch}, step {step}")]
    NonfiniteLoss { loss: f64, epoch: usize, step: usize },

    #[error("non-finite objective at iteration {0}")]
    NonfiniteObjective(usize),

    #[error("reference signal has zero norm")]
    ZeroSignal,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = GcsError> = std::result::Result<T, E>;

pub(crate) fn dim_mismatch(what: &str, expected: usize, found: usize) -> GcsError {
    GcsError::DimensionMismatch(format!("{what}: expected {expected}, found {found}"))
}
