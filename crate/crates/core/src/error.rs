use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("invalid price for entity `{entity}` on {date}: {value}")]
    InvalidPrice {
        entity: String,
        date: NaiveDate,
        value: f64,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical error at index {index}: {message}")]
    Numerical { index: usize, message: String },

    #[error("unknown entity `{0}`")]
    UnknownEntity(String),

    #[error("estimation failed: {message}")]
    Estimation {
        message: String,
        /// Best parameter vector found before giving up, in natural units.
        best_params: Vec<f64>,
        best_loglik: f64,
        converged: bool,
    },

    #[error("root solver failed: {0}")]
    Solver(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
