use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("insufficient data: {what} needs at least {required} values, got {actual}")]
    InsufficientData {
        what: &'static str,
        required: usize,
        actual: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("zero variance: cannot scale a constant training series")]
    ZeroVariance,

    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error(
        "rank-deficient design matrix ({columns} columns, column {column} is collinear); \
         try a smaller order or enable the ridge fallback"
    )]
    RankDeficient { columns: usize, column: usize },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("training diverged at epoch {epoch} (last finite loss {last_finite_loss:?})")]
    Diverged {
        epoch: usize,
        last_finite_loss: Option<f64>,
    },

    #[error("schema error: required column `{0}` not found in header")]
    MissingColumn(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("too many malformed rows: {malformed} of {total}; check the column mapping")]
    MostlyMalformed { malformed: usize, total: usize },

    #[error("unknown TMC code `{code}`; available: {available}")]
    UnknownCode { code: String, available: String },

    #[error("field `{0}` absent from records")]
    FieldAbsent(&'static str),

    #[error("leading missing value cannot be forward-filled")]
    LeadingGap,

    #[error("model file format: {0}")]
    Format(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(context: &'static str, expected: impl ToString, actual: impl ToString) -> Self {
        Error::Shape {
            context,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}
