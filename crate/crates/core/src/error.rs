use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("polygon is not strictly convex at vertex {vertex}")]
    NotConvex { vertex: usize },

    #[error("radius {radius} too large: ball around vertex {vertex} meets a non-incident edge")]
    RadiusTooLarge { vertex: usize, radius: f64 },

    #[error("only orthant cones (box corners) are supported in three dimensions")]
    UnsupportedCone,

    #[error("evaluation point coincides with the singular point")]
    SingularPoint,

    #[error("parameter outside its admissible range: {0}")]
    Inadmissible(String),

    #[error("Laplace transform domain condition violated: Re(z.theta) = {min_real_part} on a cone ray")]
    DomainCondition { min_real_part: f64 },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("grid resolves only {points_per_wavelength:.2} points per wavelength (at least {required} needed)")]
    Resolution { points_per_wavelength: f64, required: f64 },

    #[error("iterative solver did not converge: residual {residual:.3e} after {iterations} iterations")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("singular mode-matching system at order {order}")]
    SingularMode { order: i64 },

    #[error("field is numerically zero near the expansion point")]
    NumericallyZero,

    #[error("no harmonic component up to degree {n_max} rises above the noise floor")]
    DegreeExceeded { n_max: usize },

    #[error("point {0:?} lies inside the contrast support")]
    InsideSupport(Vec<f64>),

    #[error("remainder symbol too small on the shell |xi| ~ {shell:.3}")]
    SmallSymbol { shell: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidArgument {
        name,
        reason: reason.into(),
    }
}
