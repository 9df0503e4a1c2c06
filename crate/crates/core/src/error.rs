use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid level {0}: levels must be >= 1")]
    InvalidLevel(i64),

    #[error("invalid node id {0} for a network of {1} nodes")]
    InvalidNode(usize, usize),

    #[error("invalid quantum state: {0}")]
    InvalidState(String),

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("failure-domain error: {0}")]
    Domain(String),

    #[error("accessibility ratio is undefined: baseline throughput is zero")]
    UndefinedRatio,

    #[error("metric error: {0}")]
    Metric(String),

    #[error("estimation error: {0}")]
    Estimation(String),

    #[error("Lie-group error: {0}")]
    LieGroup(String),

    #[error("parse error in {file}: {message}")]
    Parse { file: String, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
