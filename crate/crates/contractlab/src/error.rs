use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Model parameters fail structural validation.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// An iterative solver failed to bracket or converge.
    #[error("solver error: {0}")]
    Solver(String),

    /// A required precomputed input is missing.
    #[error("dependency error: {0}")]
    Dependency(String),

    /// Configuration file could not be parsed or violates the schema.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn solver(msg: impl Into<String>) -> Self {
        Error::Solver(msg.into())
    }
}
