use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TheoryError {
    #[error("degenerate instance: {0}")]
    Degenerate(String),
    #[error("domain error: {0}")]
    Domain(String),
    /// A zero estimate is unaffected by any weight.
    #[error("weight has no effect on a zero estimate")]
    NoEffect,
}

pub type Result<T> = std::result::Result<T, TheoryError>;
