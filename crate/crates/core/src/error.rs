use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input violates a documented parameter constraint.
    #[error("invalid parameter: {0}")]
    Parameter(String),
    /// An argument lies outside the domain where a formula is defined.
    #[error("outside domain: {0}")]
    Domain(String),
    /// The requested operation does not apply to this mass/α regime.
    #[error("wrong regime: {0}")]
    Regime(String),
    /// An iterative method failed to converge.
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("analysis error: {0}")]
    Analysis(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
