use thiserror::Error;

/// Errors raised by the estimation library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid quadrature order {0}: must be at least 1")]
    InvalidOrder(usize),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("direction is undefined for a zero-length vector")]
    UndefinedDirection,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("empty noise subspace: {sources} sources with {snapshots} snapshots")]
    EmptySubspace { sources: usize, snapshots: usize },

    #[error("ill-conditioned noise subspace recovery (condition number {condition:.3e})")]
    IllConditionedRecovery { condition: f64 },

    #[error("under-detection: wanted {wanted} peaks, found {}", found.len())]
    UnderDetection { wanted: usize, found: Vec<(f64, f64)> },

    #[error("singular system (condition number {condition:.3e})")]
    SingularSystem { condition: f64 },

    #[error("index {index} out of range for {len} entries")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("attitude is not identifiable: projected composite matrix vanishes")]
    UnidentifiableAttitude,

    #[error("snapshot vector is identically zero")]
    ZeroSnapshots,

    #[error("perpendicular attitude norm {norm:.6} exceeds the unit bound")]
    InconsistentAttitude { norm: f64 },

    #[error("singular Fisher information; deficient directions: {}", directions.join(", "))]
    SingularFim { directions: Vec<String> },

    #[error("unsupported sampling mode: {0}")]
    UnsupportedMode(String),

    #[error("{0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}
