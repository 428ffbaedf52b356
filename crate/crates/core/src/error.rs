use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("{0}")]
    InvalidArgument(String),

    #[error("non-finite intermediate value while computing {0}")]
    NonFinite(&'static str),

    #[error("exponent {exponent:.3e} in {context} is beyond the stable evaluation bound")]
    OverflowRisk { context: &'static str, exponent: f64 },

    #[error("raw probability {value:.3e} lies outside [0, 1] beyond tolerance {tolerance:.1e}")]
    ProbabilityOutOfRange { value: f64, tolerance: f64 },

    #[error(
        "Laplace inversion at t = {t} did not converge: error estimate {estimate:.3e} exceeds target {target:.1e}"
    )]
    InversionNotConverged { t: f64, estimate: f64, target: f64 },

    #[error("series did not converge within {0} terms")]
    SeriesNotConverged(usize),

    #[error("geometric series diverges: denominator {0:.3e} is not positive")]
    DivergentSeries(f64),

    #[error("line {line}: {message}")]
    Input { line: u64, message: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, value: f64, reason: &'static str) -> Self {
        Error::InvalidParameter { name, value, reason }
    }
}
