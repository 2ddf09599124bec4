use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("probability must lie in [0, 1], got {0}")]
    InvalidProbability(f64),

    #[error("divergence must be a non-negative number, got {0}")]
    InvalidDivergence(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("arm {arm} has not been pulled yet")]
    UnpulledArm { arm: usize },

    #[error("arm index {index} out of range for {arms} arms")]
    ArmOutOfRange { index: usize, arms: usize },

    #[error("no unique best arm: top two means are both {0}")]
    TiedBestArm(f64),

    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: PathBuf, column: String },

    #[error("{path}: row {row}, column `{column}`: `{value}` is not a non-negative integer")]
    BadCount {
        path: PathBuf,
        row: usize,
        column: String,
        value: String,
    },

    #[error("{path}: need at least 2 captions with votes, found {found}")]
    TooFewCaptions { path: PathBuf, found: usize },

    #[error("caption `{0}` has no votes")]
    EmptyCaption(String),

    #[error("{path}: malformed output file: {reason}")]
    MalformedOutput { path: PathBuf, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures caused by the filesystem rather than by bad input values.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io { .. } => true,
            Error::Csv { source, .. } => matches!(source.kind(), csv::ErrorKind::Io(_)),
            _ => false,
        }
    }
}
