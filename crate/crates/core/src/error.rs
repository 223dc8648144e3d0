use thiserror::Error;

/// Errors surfaced by the library. Parse errors carry the 1-based line
/// number of the offending input line (the header is line 1).
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Inputs are well formed but semantically unusable
    /// (empty catalog, missing user, mismatched candidate sets, ...).
    #[error("{0}")]
    Data(String),

    /// Numerical failure: singular solve, non-finite loss, bad shapes.
    #[error("{0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Serde(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

impl Error {
    pub fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse { line, message: message.into() }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Error::Data(message.into())
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        Error::Numeric(message.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
