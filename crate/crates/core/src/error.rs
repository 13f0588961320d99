use std::path::PathBuf;

/// Unified error type for every fallible operation in this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("image codec: {0}")]
    Image(#[from] image::ImageError),

    #[error("{path}: {detail}")]
    Malformed { path: PathBuf, detail: String },

    #[error("color tag mismatch: expected {expected}, found {found}")]
    TagMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration: {0}")]
    Configuration(String),

    #[error("no score found in judge reply: {reply:?}")]
    ScoreParse { reply: String },

    #[error("evaluation failed after {attempts} attempts: {last}")]
    EvaluationFailed { attempts: u32, last: String },

    #[error("http: {0}")]
    Http(#[from] reqwest::Error),
}

impl Error {
    pub(crate) fn malformed(path: impl Into<PathBuf>, detail: impl Into<String>) -> Self {
        Error::Malformed {
            path: path.into(),
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
