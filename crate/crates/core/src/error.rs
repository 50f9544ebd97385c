use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite entry at index {index}")]
    NonFinite { index: usize },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    SymmetryViolation { asymmetry: f64 },

    #[error("{routine} did not converge after {sweeps} sweeps")]
    NoConvergence { routine: &'static str, sweeps: usize },

    #[error("metric projection is undefined at this point: {0}")]
    ProjectionUndefined(String),

    #[error("point is off the manifold (constraint residual {residual:e})")]
    InvalidPoint { residual: f64 },

    #[error("vector is not tangent at the base point (normal component {normal:e})")]
    InvalidTangent { normal: f64 },

    #[error("tangent vector norm {norm} reaches the projection radius {reach}")]
    ReachViolation { norm: f64, reach: f64 },

    #[error("step too long: step norm {norm} reaches the projection radius {reach}")]
    StepTooLong { norm: f64, reach: f64 },

    #[error("iteration {iteration} failed: {source}")]
    IterationFailed {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("point lies at the excluded pole of chart {chart}")]
    ChartDomain { chart: &'static str },

    #[error("not a fixed point: Riemannian gradient norm {grad_norm:e}")]
    NotFixedPoint { grad_norm: f64 },

    #[error("invalid constants: {0}")]
    InvalidConstants(String),

    #[error("point is already a fixed point of the iteration")]
    AlreadyFixed,

    #[error("no chart crossing: last coordinate {last} must be positive")]
    NoCrossing { last: f64 },

    #[error("closed-form crossing step misses the pole by {distance:e}")]
    CrossingMismatch { distance: f64 },

    #[error("unsupported combination: {0}")]
    Unsupported(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("step size {alpha} is not below the certified bound {alpha_bar}; refusing to run")]
    Uncertified { alpha: f64, alpha_bar: f64 },
}

impl Error {
    /// Short machine-readable tag for reports and CLI error objects.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Shape(_) => "shape",
            Error::NonFinite { .. } => "non_finite",
            Error::SymmetryViolation { .. } => "symmetry_violation",
            Error::NoConvergence { .. } => "numerical_failure",
            Error::ProjectionUndefined(_) => "projection_undefined",
            Error::InvalidPoint { .. } => "invalid_point",
            Error::InvalidTangent { .. } => "invalid_tangent",
            Error::ReachViolation { .. } => "reach_violation",
            Error::StepTooLong { .. } => "step_too_long",
            Error::IterationFailed { .. } => "iteration_failed",
            Error::ChartDomain { .. } => "chart_domain",
            Error::NotFixedPoint { .. } => "not_a_fixed_point",
            Error::InvalidConstants(_) => "invalid_constants",
            Error::AlreadyFixed => "already_fixed_point",
            Error::NoCrossing { .. } => "no_crossing",
            Error::CrossingMismatch { .. } => "numerical_failure",
            Error::Unsupported(_) => "not_implemented",
            Error::InvalidInput(_) => "invalid_input",
            Error::Uncertified { .. } => "refuse_to_run",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
