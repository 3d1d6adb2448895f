use thiserror::Error;

/// Errors raised across the library. The CLI maps the broad categories
/// (parse, validation, numeric) onto distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error in {source_name}: {message}")]
    Parse { source_name: String, message: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid group structure: {0}")]
    InvalidGroups(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dataset {dataset} has no observed events (all censored)")]
    AllCensored { dataset: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("infeasible simulation design: {0}")]
    InfeasibleDesign(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn parse(source_name: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.into(),
            message: message.into(),
        }
    }

    /// Coarse category used for process exit codes.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Parse { .. } | Error::Io(_) => ErrorKind::Parse,
            Error::Numeric(_) => ErrorKind::Numeric,
            _ => ErrorKind::Validation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Parse,
    Validation,
    Numeric,
}

pub type Result<T> = std::result::Result<T, Error>;
