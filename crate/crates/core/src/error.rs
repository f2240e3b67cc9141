use thiserror::Error;

/// Errors produced by the karma economy library.
#[derive(Debug, Error)]
pub enum KarmaError {
    /// A configuration or construction parameter is out of range.
    #[error("invalid parameter `{field}`: {message}")]
    Parameter { field: String, message: String },

    /// An operation was called with inputs violating its precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// An iterative numerical routine failed to reach its tolerance.
    #[error("solver did not converge: {message} (residual {residual:e})")]
    Solver { message: String, residual: f64 },

    /// The linear program is infeasible, unbounded or malformed.
    #[error("linear program error: {0}")]
    Lp(String),

    /// Configuration text could not be parsed.
    #[error("config parse error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl KarmaError {
    pub(crate) fn param(field: impl Into<String>, message: impl Into<String>) -> Self {
        KarmaError::Parameter {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, KarmaError>;
