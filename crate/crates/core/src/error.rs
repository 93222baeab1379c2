use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("algebra context mismatch: {0}")]
    ContextMismatch(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("degenerate isometry: {0}")]
    Degenerate(String),
    #[error("value not representable in exact mode: {0}")]
    NotRepresentable(String),
    #[error("principal part is not parabolic: {0}")]
    NonParabolic(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
