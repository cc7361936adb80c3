use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum Error {
    /// A time or parameter lies outside the set where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),
    /// A control exceeds its admissibility bound.
    #[error("admissibility error: {0}")]
    Admissibility(String),
    /// A path or objective is missing values it needs.
    #[error("shape error: {0}")]
    Shape(String),
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
