//! The noncentral split chi-square family.
//!
//! `split_{m0}-χ²_{p,d}(δ)` is the law of
//!
//! ```text
//! ‖X₍ₚ₎ + √m0·h‖² − ‖X − √(m0/m1)·Y‖²,    X, Y ~ N_d(0, I) independent, hᵀh = δ,
//! ```
//!
//! the large-sample limit of the split likelihood ratio statistic under
//! local alternatives when the null is a smooth `k = d − p` dimensional
//! hypothesis. The cross-fit variant adds the statistic with the roles of
//! `X` and `Y` (and of `m0` and `m1`) exchanged, computed from the same pair.

mod moments;
mod montecarlo;
mod params;
mod quadform;
mod sampler;

pub use moments::{
    even_crossfit_moments, moments, normal_approx_cdf, split_moments, MomentSummary,
};
pub use montecarlo::{
    empirical_cdf, ks_critical_value, ks_distance, mc_cdf, mc_quantile, order_statistic_quantile,
    LimitBank, McEstimate, DEFAULT_LIMIT_REPS,
};
pub use params::{LimitVariant, SplitChiSqParams};
pub use quadform::{quadratic_form_moments, raw_moments_from_cumulants, QuadraticFormSpec};
pub use sampler::{sample_crossfit_limit, sample_limit, sample_limit_along, sample_split_chisq};

/// Lower and upper bounds applied to splitting ratios at API boundaries.
pub const M0_DOMAIN: (f64, f64) = (0.01, 0.99);

/// Clamp a user-supplied splitting ratio into [`M0_DOMAIN`].
pub fn clamp_m0(m0: f64) -> f64 {
    m0.clamp(M0_DOMAIN.0, M0_DOMAIN.1)
}

/// Universal critical value `−2 ln α`.
pub fn universal_threshold(alpha: f64) -> f64 {
    -2.0 * alpha.ln()
}
