use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("rescaled frequency e^(|bt|) = {scale:.4} exceeds the oversampled band limit {limit:.4}")]
    FrequencyOverflow { scale: f64, limit: f64 },
    #[error("spectral point outside validity region: {0}")]
    OutsideRegion(String),
    #[error("quadrature failed: {0}")]
    Quadrature(String),
    #[error("integrator failed at r = {r:.6}: {reason}")]
    Integrator { r: f64, reason: String },
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        landscape: Vec<(f64, f64, f64)>,
    },
    #[error("eigensolver failed: {0}")]
    Eigen(String),
    #[error("flow aborted at tau = {tau:.4}: {reason}")]
    FlowAborted { tau: f64, reason: String },
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Validation failures are caller mistakes; everything else is a numerical
    /// or I/O failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParams(_)
                | Error::NonFinite(_)
                | Error::GridMismatch(_)
                | Error::OutsideRegion(_)
                | Error::Format(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
