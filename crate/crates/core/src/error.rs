use crate::field::Point;
use crate::harnack::HarnackChain;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("point {0:?} is outside the grid box")]
    OutOfDomain(Point),

    #[error("degenerate ball (center {center:?}, radius {radius}): {reason}")]
    DegenerateBall { center: Point, radius: f64, reason: String },

    #[error("fields or operator live on different grids")]
    GridMismatch,

    #[error("non-finite value in field '{0}'")]
    NonFinite(String),

    #[error("coefficient validation failed: {0}")]
    CoefficientValidation(String),

    #[error("solver did not converge in {iterations} iterations (best residual {best_residual:e})")]
    Convergence { iterations: usize, best_residual: f64 },

    #[error("degenerate field: {0}")]
    DegenerateField(String),

    #[error("zero set is empty")]
    EmptyZeroSet,

    #[error("empty intersection: {0}")]
    EmptyIntersection(String),

    #[error("surface integral vanishes on the sphere of radius {radius}")]
    ZeroDenominator { radius: f64 },

    #[error("insufficient coverage: {0}")]
    InsufficientCoverage(String),

    #[error("too few samples: found {found}, need {required}")]
    TooFewSamples { found: usize, required: usize },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("Harnack chain stalled after {} steps", chain.points.len().saturating_sub(1))]
    ChainStall { chain: Box<HarnackChain> },

    #[error("nodal set inclusion violated near {witness:?}")]
    InclusionViolation { witness: Point },

    #[error("nodal sets differ near {witness:?}")]
    NodalSetMismatch { witness: Point },

    #[error("corkscrew failure: {0}")]
    CorkscrewFailure(String),

    #[error("pole {pole:?} too close to the boundary: delta {delta} < {required}")]
    PolePlacement { pole: Point, delta: f64, required: f64 },

    #[error("no boundary in range: {0}")]
    NoBoundary(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("out of scope: {0}")]
    OutOfScope(String),

    #[error("malformed field file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
