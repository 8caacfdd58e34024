use thiserror::Error;

/// Errors raised by model construction, sampling setup and diagnostics.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SvError {
    #[error("parameter out of domain: {0}")]
    Domain(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("series too short: need at least {need} values, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, SvError>;
