use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid transformer shape: {0}")]
    InvalidShape(&'static str),

    #[error("{what} must be strictly positive and finite, got {value}")]
    NonPositive { what: &'static str, value: f64 },

    #[error("{what} = {value} is outside the validity range ({min}, {max}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    /// The requested point cannot be reached. `bound` is the exact boundary
    /// of the feasible region so callers can clamp to it.
    #[error("infeasible {what}: {value} must exceed {bound}")]
    Infeasible {
        what: &'static str,
        value: f64,
        bound: f64,
    },

    #[error("no finite early-stopping bound: the finite-data loss gap underflows")]
    NoFiniteBound,

    #[error("need at least {needed} usable points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("degenerate design: {0}")]
    Degenerate(String),

    #[error("fit failed: {0}")]
    FitFailed(String),

    #[error("no intersection: the two power laws have equal effective exponents")]
    NoIntersection,
}

impl Error {
    /// Stable machine-readable code for each variant.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidShape(_) => "invalid_shape",
            Error::NonPositive { .. } => "non_positive",
            Error::OutOfRange { .. } => "out_of_range",
            Error::Infeasible { .. } => "infeasible",
            Error::NoFiniteBound => "no_finite_bound",
            Error::TooFewPoints { .. } => "too_few_points",
            Error::Degenerate(_) => "degenerate",
            Error::FitFailed(_) => "fit_failed",
            Error::NoIntersection => "no_intersection",
        }
    }
}

/// Rejects zero, negative, NaN and infinite values.
pub(crate) fn positive(what: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::NonPositive { what, value })
    }
}
