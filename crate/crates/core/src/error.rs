use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("solution space of size {size} exceeds the enumeration cap {cap}")]
    EnumerationCap { size: u128, cap: usize },

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("divergence guard tripped at iteration {iteration}: loss {loss} vs initial {initial}")]
    Divergence {
        iteration: usize,
        loss: f64,
        initial: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
