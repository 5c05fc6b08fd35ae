use thiserror::Error;

/// Errors produced by the simulation and optimization routines.
#[derive(Debug, Error)]
pub enum MisError {
    #[error("invalid layout: {field} {reason}")]
    InvalidLayout { field: &'static str, reason: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid channel statistics: {0}")]
    InvalidStats(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("degenerate channel: cascade vector has zero norm")]
    DegenerateChannel,

    #[error("value outside domain: {0}")]
    Domain(String),

    #[error("subproblem stalled after {iterations} iterations (gap {gap:.3e})")]
    Stalled {
        iterations: usize,
        gap: f64,
        last: Vec<num_complex::Complex64>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, MisError>;

impl MisError {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        MisError::Shape(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        MisError::Config(msg.into())
    }
}
