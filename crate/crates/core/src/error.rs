use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    Validation { field: &'static str, reason: String },

    /// The correlation/vol-of-vol pair violates `|rho| * nu^2 < 2`.
    #[error("ill-posed parameters: |rho| * nu^2 = {product} must be < 2")]
    IllPosed { product: f64 },

    #[error("singular integral on cell [{x0}, {x1}]: combined exponent {exponent} <= -1")]
    SingularIntegral { x0: f64, x1: f64, exponent: f64 },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("singular matrix: zero pivot in column {column}")]
    SingularMatrix { column: usize },

    #[error("non-finite value encountered at time step {step}")]
    NonFinite { step: usize },

    #[error("point {point} lies outside [{lo}, {hi}]")]
    OutOfDomain { point: f64, lo: f64, hi: f64 },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),
}

impl Error {
    pub(crate) fn validation(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Validation { field, reason: reason.into() }
    }
}
