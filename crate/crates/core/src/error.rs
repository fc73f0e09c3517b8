use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("invalid split size: {0}")]
    SplitSize(String),

    #[error("degenerate split: {0}")]
    DegenerateSplit(String),

    #[error("fold assignment infeasible: {0}")]
    FoldInfeasible(String),

    #[error("degenerate folds after {attempts} attempts: {message}")]
    DegenerateFolds { attempts: usize, message: String },

    #[error("shape mismatch: expected {expected} outcome columns, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("undefined quantity: {0}")]
    Undefined(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by a randomization design that cannot be
    /// realized on the given data (single-class parts, too few clusters).
    pub fn is_degenerate_design(&self) -> bool {
        matches!(
            self,
            Error::DegenerateSample(_)
                | Error::DegenerateSplit(_)
                | Error::DegenerateFolds { .. }
                | Error::FoldInfeasible(_)
                | Error::SplitSize(_)
        )
    }

    /// True for errors caused by malformed or invalid input data.
    pub fn is_data_error(&self) -> bool {
        matches!(self, Error::Io(_) | Error::Parse { .. } | Error::Schema(_) | Error::Csv(_) | Error::Json(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
