//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid point: {0}")]
    InvalidPoint(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("generator set is not closed under the bracket (max residual {residual:.3e} > {tolerance:.3e})")]
    NotClosed { residual: f64, tolerance: f64 },

    #[error("linearly dependent generators: {0}")]
    DependentGenerators(String),

    #[error("identity check `{name}` failed: residual {residual:.3e} > {tolerance:.3e}")]
    IdentityFailed {
        name: String,
        residual: f64,
        tolerance: f64,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
