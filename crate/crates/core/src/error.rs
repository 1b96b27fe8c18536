use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A caller-supplied value violates a precondition.
    #[error("invalid input: {0}")]
    Input(String),

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid body index {index} (tree has {len} bodies)")]
    InvalidBody { index: usize, len: usize },

    /// A numerical routine failed; `residual` carries the best residual reached.
    #[error("numerical failure in {routine}: {detail} (residual {residual:.3e})")]
    Numerical {
        routine: &'static str,
        detail: String,
        residual: f64,
    },

    #[error("infeasible height {z_d:.4} m: {reason}")]
    InfeasibleHeight { z_d: f64, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("controller failure at t = {time:.4} s: {reason}")]
    Controller { time: f64, reason: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { what, expected, got })
    }
}
