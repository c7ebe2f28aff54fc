use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("zero vector does not represent a projective point")]
    ZeroVector,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("points are not collinear")]
    NonCollinear,
    #[error("degenerate cross-ratio configuration")]
    DegenerateConfiguration,
    #[error("point lies at infinity of the chart")]
    PointAtInfinity,
    #[error("matrix is singular (|det| = {0:e})")]
    Singular(f64),
    #[error("point is not in the interior of the domain")]
    NotInterior,
    #[error("point is not on the boundary of the domain")]
    NotBoundaryPoint,
    #[error("point lies outside the closed domain")]
    ExteriorPoint,
    #[error("coincident points")]
    CoincidentPoints,
    #[error("arclength {s} outside [0, {max}]")]
    OutOfRange { s: f64, max: f64 },
    #[error("line does not meet the domain")]
    LineMissesDomain,
    #[error("open segment is not contained in the domain")]
    SegmentNotInterior,
    #[error("domain is unbounded in its chart")]
    Unbounded,
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("map does not preserve the domain")]
    NotAnAutomorphism,
    #[error("translation length is zero")]
    ZeroTranslation,
    #[error("eigen-solver failed: {0}")]
    IllConditioned(String),
    #[error("ball of radius {0} exceeds the enumeration budget")]
    BallTooLarge(usize),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid group: {0}")]
    InvalidGroup(String),
    #[error("json: {0}")]
    Json(String),
}

impl Error {
    /// Errors caused by bad input rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::IllConditioned(_) | Error::InsufficientData(_) | Error::BallTooLarge(_)
        )
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}
