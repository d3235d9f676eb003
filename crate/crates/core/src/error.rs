use thiserror::Error;

/// Errors raised across the geometry, solver and verification layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ElasticaError {
    #[error("point {coords:?} lies outside the {model} chart domain")]
    OutOfChartDomain { model: &'static str, coords: Vec<f64> },

    #[error("tangent vectors are based at different points")]
    MismatchedBasePoints,

    #[error("points are beyond the injectivity radius (distance {distance})")]
    BeyondInjectivityRadius { distance: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("curve has {segments} segments; at least 8 are required")]
    CurveTooCoarse { segments: usize },

    #[error("consecutive nodes {index} and {next} coincide", next = index + 1)]
    DegenerateCurve { index: usize },

    #[error("curve length {actual} is not within 10% of the target length {target}")]
    LengthMismatch { actual: f64, target: f64 },

    #[error("nearest-point window is empty")]
    EmptyWindow,

    #[error("penalty weight sigma > 0 requires a reference curve")]
    MissingReference,

    #[error("invalid penalty specification: {0}")]
    InvalidPenalty(String),

    #[error("objective gradient is not finite at node {node}")]
    NonFiniteGradient { node: usize },

    #[error("non-finite value in input: {0}")]
    NonFiniteInput(&'static str),

    #[error("could not build a seed curve: {0}")]
    SeedFailure(String),

    #[error("line search stalled after {iterations} iterations")]
    LineSearchStalled { iterations: usize },

    #[error("curve is (numerically) a geodesic; {0}")]
    GeodesicDegenerate(&'static str),

    #[error("field has {field} values but curve has {nodes} nodes")]
    FieldCurveMismatch { field: usize, nodes: usize },

    #[error("no arc chain with at most {max_pieces} pieces matches the boundary data")]
    NoChainFound { max_pieces: usize },

    #[error("invalid boundary conditions: {0}")]
    InvalidBoundary(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("constraint projection failed to converge (residual {residual:e})")]
    ProjectionFailed { residual: f64 },

    #[error("linear system is singular")]
    SingularSystem,

    #[error("I/O error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, ElasticaError>;

impl From<std::io::Error> for ElasticaError {
    fn from(e: std::io::Error) -> Self {
        ElasticaError::Io(e.to_string())
    }
}
