use core::fmt;

use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Two fields (or a field and a grid) were built on different bases.
    BasisMismatch,
    /// A coefficient or sample was NaN or infinite.
    NonFinite { what: &'static str },
    /// Sample count does not form an `M^dim` grid with `M >= N`.
    InvalidGrid { expected: usize, got: usize },
    /// Energy-type norms are only defined on a `(u, ut)` state.
    NeedsState,
    /// Sobolev norms are taken of a single field, not a state.
    NeedsField,
    /// Quadrature grid too coarse for an exact projection.
    Aliasing { needed_degree: usize, grid_degree: usize },
    /// A growth hypothesis on the nonlinearities fails.
    Hypothesis(HypothesisViolation),
    /// A parameter is outside its admissible range.
    InvalidParameter { name: &'static str, reason: String },
    /// Trajectory records are not contiguous at step granularity.
    NotContiguous,
    /// Newton iteration for a stationary point did not converge.
    NoConvergence { iterations: usize, residual: f64 },
    /// Integration produced a non-finite state.
    BlowUp { time: f64 },
}

/// Which growth condition on `(f, g)` is violated.
#[derive(Debug, Clone, PartialEq)]
pub enum HypothesisViolation {
    /// `p + q > 0` fails.
    ZeroGrowth,
    /// `-C + alpha |u|^p <= f(u)` fails for large `|u|`.
    DampingLowerBound { detail: String },
    /// `-C + alpha |u|^q <= g'(u)` fails for large `|u|`.
    InteractionLowerBound { detail: String },
}

impl HypothesisViolation {
    /// Human readable form of the failing inequality.
    pub fn inequality(&self) -> &'static str {
        match self {
            HypothesisViolation::ZeroGrowth => "p+q>0",
            HypothesisViolation::DampingLowerBound { .. } => "-C+alpha|u|^p <= f(u)",
            HypothesisViolation::InteractionLowerBound { .. } => "-C+alpha|u|^q <= g'(u)",
        }
    }
}

impl fmt::Display for HypothesisViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HypothesisViolation::ZeroGrowth => {
                write!(f, "growth hypothesis p+q>0 violated (f constant and g linear)")
            }
            HypothesisViolation::DampingLowerBound { detail }
            | HypothesisViolation::InteractionLowerBound { detail } => {
                write!(f, "growth hypothesis {} violated: {}", self.inequality(), detail)
            }
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::BasisMismatch => write!(f, "fields live on different bases"),
            Error::NonFinite { what } => write!(f, "non-finite value in {what}"),
            Error::InvalidGrid { expected, got } => {
                write!(f, "expected {expected} samples, got {got}")
            }
            Error::NeedsState => write!(f, "energy norms E/E1/E2 require a state (u, ut)"),
            Error::NeedsField => write!(f, "Sobolev norms require a single field"),
            Error::Aliasing { needed_degree, grid_degree } => write!(
                f,
                "aliasing: composite of degree {needed_degree} needs a finer grid (exact up to degree {grid_degree})"
            ),
            Error::Hypothesis(v) => write!(f, "{v}"),
            Error::InvalidParameter { name, reason } => write!(f, "invalid {name}: {reason}"),
            Error::NotContiguous => write!(f, "trajectory records are not contiguous steps"),
            Error::NoConvergence { iterations, residual } => write!(
                f,
                "Newton iteration did not converge after {iterations} iterations (residual {residual:e})"
            ),
            Error::BlowUp { time } => write!(f, "non-finite state at t = {time}"),
        }
    }
}

impl From<HypothesisViolation> for Error {
    fn from(v: HypothesisViolation) -> Self {
        Error::Hypothesis(v)
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
