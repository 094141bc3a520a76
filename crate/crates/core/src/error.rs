use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("fit failed: {message}")]
    Fit {
        message: String,
        /// ELBO or log-likelihood values recorded before the failure.
        trace: Vec<f64>,
    },

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("model file has schema version {found}, expected {expected}")]
    Version { found: u32, expected: u32 },

    #[error("invalid argument: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn fit(message: impl Into<String>, trace: Vec<f64>) -> Self {
        Error::Fit {
            message: message.into(),
            trace,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
