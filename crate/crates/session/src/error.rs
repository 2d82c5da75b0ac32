use ide_core::CoreError;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SessionError {
    /// Malformed request or answer; `field` names the offending input.
    #[error("{message}")]
    Validation { message: String, field: Option<String> },
    /// Stale query id, contradictory duplicate, or finished session.
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    NotFound(String),
    #[error("storage: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl SessionError {
    pub fn validation(message: impl Into<String>, field: impl Into<String>) -> Self {
        SessionError::Validation { message: message.into(), field: Some(field.into()) }
    }

    pub fn code(&self) -> &'static str {
        match self {
            SessionError::Validation { .. } => "validation_error",
            SessionError::Conflict(_) => "conflict",
            SessionError::NotFound(_) => "not_found",
            SessionError::Io(_) => "storage_error",
            SessionError::Core(_) => "internal_error",
        }
    }
}

impl From<std::io::Error> for SessionError {
    fn from(e: std::io::Error) -> Self {
        SessionError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, SessionError>;
