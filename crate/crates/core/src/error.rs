use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("coefficient {which}[{index}] = {value} must be at least 2")]
    BadCoefficient {
        which: &'static str,
        index: usize,
        value: u64,
    },
    #[error("level {level} exceeds the derived range 0..={max}")]
    LevelOutOfRange { level: usize, max: usize },
    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: String, limit: String },
    #[error("expected {expected} arguments, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: String, got: String },
    #[error("position {0} is not the start of an occurrence")]
    NotAnOccurrence(String),
    #[error("unique readability fails: {0}")]
    Readability(String),
    #[error("word too long to materialize ({0} symbols)")]
    TooLong(String),
    #[error("invalid symbol {0:?}")]
    BadSymbol(String),
    #[error("invalid document: {0}")]
    Document(String),
    #[error("undecidable at this horizon: {0}")]
    Undecidable(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
