use thiserror::Error;

/// Errors produced anywhere in the synthesis and simulation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("not Hurwitz: {0}")]
    NotHurwitz(String),

    #[error("eigenvalue computation failed")]
    EigenFailure,

    #[error("ill-posed interconnection (condition number {cond:.3e})")]
    IllPosed { cond: f64 },

    #[error("pair (A, C) is not detectable: {0}")]
    NotDetectable(String),

    #[error("iteration did not converge: {0}")]
    NoConvergence(String),

    #[error("singular system pencil: {0}")]
    SingularPencil(String),

    #[error("isolation filter: {0}")]
    Isolation(String),

    #[error("grid model: {0}")]
    Grid(String),

    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("assumption check failed: {0}")]
    Assumption(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for configuration or input-validation failures (as opposed to
    /// numerical or runtime failures).
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Validation { .. } | Error::Parse { .. })
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            return Error::Io(std::io::Error::other(e));
        }
        Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
