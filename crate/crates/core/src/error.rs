use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum FsdError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A weight, cloud, depth or record file could not be decoded. `field`
    /// names the offending entry.
    #[error("format error in `{field}`: {message}")]
    Format { field: String, message: String },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("consistency check failed: {0}")]
    Consistency(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl FsdError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        FsdError::InvalidArgument(msg.into())
    }

    pub(crate) fn format(field: impl Into<String>, message: impl Into<String>) -> Self {
        FsdError::Format {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = FsdError> = std::result::Result<T, E>;
