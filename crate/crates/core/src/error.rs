use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GmxbError {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Extreme-point search was requested at an anniversary where the
    /// reduction to a finite candidate set does not hold.
    #[error("bang-bang not certified at anniversary {anniversary}: {reason}")]
    NotCertified { anniversary: usize, reason: String },

    #[error("missing control map for anniversary {0}")]
    MissingControlMap(usize),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, GmxbError>;
