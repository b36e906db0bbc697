use thiserror::Error;

use crate::mac::EpisodeMetrics;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("enumeration of {codes}^{active} assignments exceeds the bound of {bound}")]
    EnumerationBound { active: u64, codes: u64, bound: u64 },

    #[error("malformed signal window: expected {expected} bits, got {actual}")]
    MalformedWindow { expected: usize, actual: usize },

    /// The episode hit its slot cap before the alarm got through. The partial
    /// metrics are kept so the caller can record the censored run.
    #[error("episode truncated after {cap} slots without a successful alarm")]
    Truncated {
        cap: u64,
        metrics: Box<EpisodeMetrics>,
    },

    #[error("empty deployment: no nodes to hold the alarm")]
    EmptyDeployment,

    #[error("config {path}:{line}: {message}")]
    Config {
        path: String,
        line: usize,
        message: String,
    },

    #[error("malformed table row {line}: {message}")]
    Table { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
