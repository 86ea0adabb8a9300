use thiserror::Error;

/// Errors raised by the split likelihood ratio toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter violated its documented domain.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Matrix or vector shapes do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A data split would leave one of the two parts empty.
    #[error("split of {n} points at m0 = {m0} leaves an empty part (|D0| = {n0}, |D1| = {n1})")]
    EmptySplit {
        n: usize,
        m0: f64,
        n0: usize,
        n1: usize,
    },

    /// An iterative procedure stopped without meeting its tolerance.
    #[error("no convergence: {0}")]
    NonConvergence(String),

    /// The data are numerically unusable for the requested fit.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of iterative numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonConvergence(_) | Error::Numerical(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
