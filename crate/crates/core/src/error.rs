use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),

    #[error("malformed RLE: {0}")]
    MalformedRle(String),

    #[error("operation requires a nonempty mask")]
    EmptyMask,

    #[error("invalid cost matrix: {0}")]
    InvalidCost(String),

    #[error("feature vector has zero norm")]
    ZeroNorm,

    #[error("feature length mismatch: {0} vs {1}")]
    FeatureLength(usize, usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid pen region: {0}")]
    Pen(String),

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("detector failed on frame {frame}: {reason}")]
    Detector { frame: u64, reason: String },

    #[error("propagator failed on frame {frame}: {reason}")]
    Propagator { frame: u64, reason: String },

    #[error("no initialization found for clip {0}")]
    Irrecoverable(u32),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
