use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("argument outside the domain: {0}")]
    Domain(String),

    #[error("level {level} lies outside the tabulated range [0, {x_max}]")]
    OutOfTable { level: f64, x_max: f64 },

    #[error("path integrity violated: {0}")]
    Integrity(String),

    #[error("argmin of the path is not unique (attained at times {first} and {second})")]
    AmbiguousArgmin { first: f64, second: f64 },

    #[error("unsupported evaluation: {0}")]
    Unsupported(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("failed to read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable category, used in CLI error reports.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Domain(_) => "domain",
            Error::OutOfTable { .. } => "out_of_table",
            Error::Integrity(_) => "integrity",
            Error::AmbiguousArgmin { .. } => "ambiguous_argmin",
            Error::Unsupported(_) => "unsupported",
            Error::EmptyDataset(_) => "empty_dataset",
            Error::Read { .. } | Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
