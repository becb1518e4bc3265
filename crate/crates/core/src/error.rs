use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter point lies outside the annulus where the curve data is valid.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid curve: field `{field}`: {reason}")]
    InvalidCurve { field: String, reason: String },

    #[error("invalid polynomial: {0}")]
    InvalidPolynomial(String),

    #[error("zero polynomial cannot be normalized")]
    ZeroPolynomial,

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    /// Every supplied degree pair put the base point inside its exceptional set.
    #[error("exclusion error: {0}")]
    Exclusion(String),

    #[error("conditioning error: residual {residual:.3e} exceeds tolerance {tolerance:.1e}")]
    Conditioning { residual: f64, tolerance: f64 },

    #[error("linear program failed: {0}")]
    Lp(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Numerical failures (as opposed to bad inputs).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Conditioning { .. } | Error::Lp(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
