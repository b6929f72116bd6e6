use thiserror::Error;

/// Errors produced across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index out of range: {what} = {index}, limit {limit}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("size guard exceeded: {what} = {size} > {limit}")]
    SizeGuard {
        what: &'static str,
        size: u128,
        limit: u128,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("game is not a potential game (max residual {0:e})")]
    NotPotential(f64),

    #[error("assumption check failed: {0}")]
    Assumption(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
