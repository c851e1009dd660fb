use thiserror::Error;

/// Errors raised by domain construction, meshing and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("self-intersecting boundary: loop {loop_a} crosses loop {loop_b}")]
    SelfIntersecting { loop_a: usize, loop_b: usize },

    #[error("cluster placement impossible: {0}")]
    ClusterPlacement(String),

    #[error("feature below minimum size: {0}")]
    FeatureTooSmall(String),

    #[error("unresolved feature on loop {loop_id}: {reason}")]
    UnresolvedFeature { loop_id: usize, reason: String },

    #[error("curvature undefined: {0}")]
    CurvatureUndefined(String),

    #[error("degenerate polygon: {0}")]
    Degenerate(String),

    #[error("mesh too coarse: no interior vertices")]
    MeshTooCoarse,

    #[error("meshing failed: {0}")]
    Meshing(String),

    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    SolverDiverged { iterations: usize, residual: f64 },

    #[error("eigen solver did not converge after {iterations} iterations (last lambda {lambda}, relative change {change:e})")]
    EigenDiverged {
        iterations: usize,
        lambda: f64,
        change: f64,
    },

    #[error("field does not belong to this mesh")]
    MeshMismatch,

    #[error("invalid point: {0}")]
    InvalidPoint(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("quadrature tolerance not reached: estimated error {0:e}")]
    Quadrature(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
