use thiserror::Error;

/// Errors raised by geometric, potential and spectral computations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("degenerate chart at {point:?}: smallest singular value {sigma_min:e} <= {tol:e}")]
    DegenerateChart {
        point: Vec<f64>,
        sigma_min: f64,
        tol: f64,
    },
    #[error("curvature form is not symmetric (residual {residual:e})")]
    NonSymmetricForm { residual: f64 },
    #[error("normal frame flips between neighbouring points (overlap {overlap:.3})")]
    FrameDiscontinuity { overlap: f64 },
    #[error("offset surface degenerates: 1 + eps*k = {factor:e}")]
    OffsetDegenerate { factor: f64 },
    #[error("finite-difference step failure: Richardson disagreement {disagreement:e} at step {step:e}")]
    StepFailure { disagreement: f64, step: f64 },
    #[error("sample point ({x:.4}, {y:.4}) lies within {distance:e} of the projection pole")]
    PoleProximity { x: f64, y: f64, distance: f64 },
    #[error("grid too coarse: Richardson estimate {estimate:.3e} exceeds {tolerance:e} of the spectral scale")]
    GridTooCoarse { estimate: f64, tolerance: f64 },
    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("unknown chart `{0}`")]
    UnknownChart(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
