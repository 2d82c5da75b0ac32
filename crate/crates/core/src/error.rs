use thiserror::Error;

/// Errors raised by the core library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoreError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("value out of range: {0}")]
    Range(String),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("test undefined: {0}")]
    UndefinedTest(String),
    /// The evaluation oracle cannot answer yet (a live session waiting on a
    /// human). Engines abandon the step in progress when they see this.
    #[error("evaluation suspended: awaiting an answer")]
    Suspended,
}

pub type Result<T> = std::result::Result<T, CoreError>;
