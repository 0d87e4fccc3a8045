//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid pattern: {0}")]
    Pattern(String),

    #[error("simulation error: {0}")]
    Simulation(String),

    #[error("estimation error: {0}")]
    Estimation(String),

    #[error("optimization error: {0}")]
    Optimization(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
