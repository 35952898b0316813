use thiserror::Error;

/// Errors produced by the infostyle pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to decode image ({len} bytes): {message}")]
    Decode { len: usize, message: String },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite value in input")]
    NonFiniteInput,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("image `{id}` is missing feature `{feature}`")]
    MissingFeature { id: String, feature: String },

    #[error("no PCA parameters for reduced feature `{0}`")]
    MissingPca(String),

    #[error("empty data set")]
    EmptyData,

    #[error("empty input")]
    EmptyInput,

    #[error("index fingerprint {index} does not match model fingerprint {model}")]
    FingerprintMismatch { index: String, model: String },

    #[error("unknown image id `{0}`")]
    UnknownId(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
