use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("inadmissible symbol: {0}")]
    Symbol(String),
    #[error("non-finite field values")]
    NonFinite,
    #[error("grid mismatch between fields")]
    GridMismatch,
    #[error("{0}")]
    Invalid(String),
    #[error("not converged: {0}")]
    NotConverged(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
