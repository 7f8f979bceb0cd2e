use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("grid size {0} must be a power of two and at least 16")]
    GridSize(usize),
    #[error("side length {0} must be positive and finite")]
    SideLength(f64),
    #[error("array of length {got} does not match grid with {expected} vertices")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("mollification scale {epsilon} is below the resolution limit {limit}")]
    BelowResolution { epsilon: f64, limit: f64 },
    #[error("radius {radius} is below the minimum {minimum}")]
    RadiusTooSmall { radius: f64, minimum: f64 },
    #[error("circle sample count {0} is below 64")]
    TooFewSamples(usize),
    #[error("xi must be positive and finite, got {0}")]
    NonPositiveXi(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("vertex sets overlap")]
    OverlappingSets,
    #[error("vertex set is empty")]
    EmptySet,
    #[error("vertex {0} is masked")]
    MaskedVertex(usize),
    #[error("vertex {0} lies outside the query region")]
    OutsideRegion(usize),
    #[error("vertex {0} is out of range")]
    VertexOutOfRange(usize),
    #[error("endpoints are not connected")]
    Unreachable,
    #[error("degenerate annulus: {0}")]
    DegenerateAnnulus(&'static str),
    #[error("annulus too thin to contain a separating lattice cycle")]
    ThinAnnulus,
    #[error("square of side {side} does not fit inside the domain")]
    SquareOutsideDomain { side: f64 },
    #[error("separating-cycle audit failed")]
    AuditFailed,
    #[error("non-positive median {0} in exponent fit")]
    NonPositiveMedian(f64),
    #[error("shift is not a lattice multiple")]
    NonLatticeShift,
    #[error("perturbation touches the closure of the region at vertex {0}")]
    PerturbationInRegion(usize),
}

pub type Result<T> = core::result::Result<T, Error>;
