use thiserror::Error;

/// Errors raised by the analysis pipeline.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("eigenvalue iteration did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("generalized eigenvector chains are too ill-conditioned (condition estimate {condition:.3e}); supply a structured form instead")]
    DefectiveFormUnresolved { condition: f64 },

    #[error("t * max|Re(lambda)| = {exponent:.3} exceeds 700; refusing to form an overflowing exponential")]
    OverflowRisk { exponent: f64 },

    #[error("purely imaginary spectrum is not rationally related (worst ratio {worst_ratio})")]
    NotRationallyRelated { worst_ratio: f64 },

    #[error("the action is not free (isotropy {isotropy}); no cross-section is constructed")]
    NotFree { isotropy: String },

    #[error("point lies outside Omega: {condition}")]
    OutsideOmega { condition: String },

    #[error("property violation: {property} at v = {point:?}, t = {time}; residual {residual:.3e}")]
    PropertyViolation {
        property: String,
        point: Vec<f64>,
        time: f64,
        residual: f64,
    },

    #[error("isotropy is not a lattice ({isotropy})")]
    NotLattice { isotropy: String },

    #[error("adapted ellipsoid is not flow-invariant (residual {residual})")]
    AdaptedNormFailure { residual: f64 },

    #[error("test function returned a non-finite value at {point:?}")]
    EvaluationFailure { point: Vec<f64> },

    #[error("inconsistent inputs: {0}")]
    InconsistentInputs(String),

    #[error("no well-conditioned chart of the cross-section at {point:?} (condition {condition:.3e})")]
    ChartFailure { point: Vec<f64>, condition: f64 },

    #[error("importance sampler collapsed: effective sample size {ess:.1} below 1% of {count}")]
    EnvelopeMismatch { ess: f64, count: usize },

    #[error("window T = {window} too small: mass still growing (ratio {mass_ratio:.6}) while tails keep decaying")]
    WindowTooSmall { window: f64, mass_ratio: f64 },

    #[error("test function `{0}` is not p-integrable on R^n")]
    NotIntegrable(String),
}

impl Error {
    /// Coarse classification used by drivers to choose an exit status.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidInput(_)
            | Error::NotFree { .. }
            | Error::NotLattice { .. }
            | Error::OutsideOmega { .. }
            | Error::InconsistentInputs(_)
            | Error::NotIntegrable(_)
            | Error::NotRationallyRelated { .. } => ErrorKind::Validation,
            Error::NonConvergence { .. }
            | Error::DefectiveFormUnresolved { .. }
            | Error::OverflowRisk { .. }
            | Error::ChartFailure { .. }
            | Error::EnvelopeMismatch { .. }
            | Error::WindowTooSmall { .. }
            | Error::EvaluationFailure { .. } => ErrorKind::NumericalRefusal,
            Error::PropertyViolation { .. } | Error::AdaptedNormFailure { .. } => {
                ErrorKind::PropertyViolation
            }
        }
    }

    /// Stable machine-readable tag.
    pub fn tag(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "InvalidInput",
            Error::NonConvergence { .. } => "NonConvergence",
            Error::DefectiveFormUnresolved { .. } => "DefectiveFormUnresolved",
            Error::OverflowRisk { .. } => "OverflowRisk",
            Error::NotRationallyRelated { .. } => "NotRationallyRelated",
            Error::NotFree { .. } => "NotFree",
            Error::OutsideOmega { .. } => "OutsideOmega",
            Error::PropertyViolation { .. } => "PropertyViolation",
            Error::NotLattice { .. } => "NotLattice",
            Error::AdaptedNormFailure { .. } => "AdaptedNormFailure",
            Error::EvaluationFailure { .. } => "EvaluationFailure",
            Error::InconsistentInputs(_) => "InconsistentInputs",
            Error::ChartFailure { .. } => "ChartFailure",
            Error::EnvelopeMismatch { .. } => "EnvelopeMismatch",
            Error::WindowTooSmall { .. } => "WindowTooSmall",
            Error::NotIntegrable(_) => "NotIntegrable",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    NumericalRefusal,
    PropertyViolation,
}

pub type Result<T> = std::result::Result<T, Error>;
