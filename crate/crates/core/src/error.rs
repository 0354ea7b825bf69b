use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Everything that can go wrong in the toolkit.
///
/// Variants are grouped by [`ErrorCategory`] so front ends can map them to
/// exit codes without matching every case.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid period N = {0}: must be at least 1")]
    InvalidPeriod(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("poles {0} and {1} are closer than the distinctness tolerance; coalesce them explicitly")]
    CoincidentPoles(Complex64, Complex64),

    #[error("filter is not SPRZ: {0}")]
    NotSprz(String),

    #[error("cannot evaluate the system function at the pole z = {0}")]
    PoleEvaluation(Complex64),

    #[error("operation requires a normalised filter (R_0 = 1), got R_0 = {0}")]
    NotNormalized(f64),

    #[error("degenerate cubic: {0}")]
    DegenerateCubic(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("s = {0} lies outside the strip where the moment generating function exists")]
    MgfDomain(f64),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("activation `{0}` has no closed form for H_k; use quadrature")]
    NoClosedForm(String),

    #[error("row {row}: {message}")]
    PriceParse { row: usize, message: String },

    #[error("row {row}: duplicate date {date}")]
    DuplicateDate { row: usize, date: chrono::NaiveDate },

    #[error("insufficient data: need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("price changes have zero variance over the volatility seed window")]
    ZeroVariance,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Coarse classification used for exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Data,
    Numerical,
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidPeriod(_)
            | Error::InvalidParameter { .. }
            | Error::CoincidentPoles(..)
            | Error::NotSprz(_)
            | Error::NotNormalized(_)
            | Error::NoClosedForm(_) => ErrorCategory::Config,
            Error::PriceParse { .. }
            | Error::DuplicateDate { .. }
            | Error::InsufficientData { .. }
            | Error::ZeroVariance
            | Error::Io(_)
            | Error::Csv(_) => ErrorCategory::Data,
            Error::PoleEvaluation(_)
            | Error::DegenerateCubic(_)
            | Error::Quadrature(_)
            | Error::MgfDomain(_)
            | Error::Numerical(_) => ErrorCategory::Numerical,
        }
    }
}
