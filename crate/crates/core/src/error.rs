use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite feature value at instance {index}")]
    NonFinite { index: usize },

    #[error("label {label} is outside the declared class set of size {n_classes}")]
    UnknownLabel { label: u32, n_classes: usize },

    #[error("instance {index} has no label")]
    MissingLabel { index: usize },

    #[error("class {0} is absent from the supervised prefix")]
    AbsentClass(u32),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("rigid fit needs at least 2 matched pairs, got {0}")]
    TooFewPairs(usize),

    #[error("csv row {row}: {message}")]
    Csv { row: usize, message: String },

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
