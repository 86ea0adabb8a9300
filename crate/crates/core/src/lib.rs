//! Split likelihood ratio tests and their large-sample theory.
//!
//! * [`splitchisq`]: the noncentral split chi-square limit laws: exact
//!   samplers, closed-form and quadratic-form moments, Monte Carlo CDFs.
//! * [`ratio`]: choosing the splitting ratio `m0`.
//! * [`slrt`]: the test engine over an abstract [`slrt::SplitModel`].
//! * [`models`]: Gaussian mean and one-factor covariance models.

// Negated comparisons below reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod models;
pub mod normal;
pub mod ratio;
pub mod rng;
pub mod slrt;
pub mod splitchisq;

pub use error::{Error, Result};
pub use splitchisq::{universal_threshold, LimitVariant, SplitChiSqParams};
