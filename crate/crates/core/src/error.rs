//! Crate-wide error type.

use crate::beta_elliptic::BetaParams;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("malformed skeleton at ({x}, {y}): pixel has {neighbors} neighbors")]
    MalformedSkeleton { x: u32, y: u32, neighbors: usize },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// Nonlinear fit did not converge; carries the best parameters seen.
    #[error("fit failed after {iterations} iterations (rms {rms:.6})")]
    FitFailure {
        best: Box<BetaParams>,
        rms: f64,
        iterations: usize,
    },

    #[error("layout error: {0}")]
    Layout(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("model serialization: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
