use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the identification, bound and verification routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not symmetric (relative asymmetry {asymmetry:.3e})")]
    NonSymmetric { asymmetry: f64 },

    #[error("eigensolver did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no block length satisfies the burn-in condition at horizon {horizon}")]
    NoFeasibleK { horizon: usize },

    #[error("trajectory overflowed during simulation")]
    OverflowedTrajectory,

    #[error("design matrix is singular")]
    SingularDesign,

    #[error("horizon {horizon} is below the required burn-in {required:.1}")]
    InfeasibleHorizon { horizon: usize, required: f64 },

    #[error("system has no input model (B and input variance are both required)")]
    MissingInputModel,

    #[error("nu = {nu} must be strictly below 1")]
    NuOutOfRange { nu: f64 },

    #[error("eps = {eps} exceeds rho/2048 = {limit}")]
    EpsTooLarge { eps: f64, limit: f64 },

    #[error("epsilon0 = {epsilon0} exceeds 1/256")]
    Epsilon0TooLarge { epsilon0: f64 },

    #[error("ball packing stalled after {consecutive_rejections} consecutive rejections with {found} of {target} points")]
    PackingStalled {
        consecutive_rejections: usize,
        found: usize,
        target: usize,
    },

    #[error("packing certificate violated: {0}")]
    SeparationViolated(String),

    #[error("matrix is not orthogonal (residual {residual:.3e})")]
    NotOrthogonal { residual: f64 },

    #[error("slope fit needs at least 3 grid points with positive medians")]
    DegenerateGrid,

    #[error("invalid sweep configuration: {0}")]
    InvalidConfig(String),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
