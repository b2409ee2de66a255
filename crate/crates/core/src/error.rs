use thiserror::Error;

/// Errors produced anywhere in the pipeline.
///
/// Each variant maps onto one of the CLI exit codes via [`AsdError::exit_code`].
#[derive(Debug, Error)]
pub enum AsdError {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("argument error: {0}")]
    Argument(String),

    #[error("config error: {0}")]
    Config(String),

    /// Too few points to define a neighbourhood; callers fall back to a fixed sigma.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("state error: {0}")]
    State(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl AsdError {
    /// 2 for argument/config errors, 3 for dimension/data errors, 4 for NaN/Inf.
    pub fn exit_code(&self) -> i32 {
        match self {
            AsdError::Argument(_) | AsdError::Config(_) | AsdError::Json(_) => 2,
            AsdError::Numerical(_) => 4,
            AsdError::Dimension(_)
            | AsdError::Degenerate(_)
            | AsdError::State(_)
            | AsdError::Format(_)
            | AsdError::Io(_)
            | AsdError::Csv(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, AsdError>;

pub(crate) fn dim_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(AsdError::Dimension(msg.into()))
}
