use super::params::{LimitVariant, SplitChiSqParams};
use super::quadform::{quadratic_form_moments, QuadraticFormSpec};
use crate::error::Result;
use crate::normal::normal_cdf;

/// Low-order moments of a limit law.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSummary {
    pub mean: f64,
    pub variance: f64,
    /// `E[Zʲ]` for `j = 1..=raw_moments.len()`.
    pub raw_moments: Vec<f64>,
    /// κ₁, κ₂, … as far as they were computed.
    pub cumulants: Vec<f64>,
}

impl MomentSummary {
    fn from_mean_variance(mean: f64, variance: f64) -> Self {
        Self {
            mean,
            variance,
            raw_moments: vec![mean, variance + mean * mean],
            cumulants: vec![mean, variance],
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Closed-form mean and variance of the split law
/// `p − d − d·r + m0·δ` and `2k + 4d·r + 2d·r² + 4m0·δ`, with `r = m0/m1`.
pub fn split_moments(params: &SplitChiSqParams) -> MomentSummary {
    let (d, p, k) = (params.d() as f64, params.p() as f64, params.k() as f64);
    let r = params.odds();
    let m0 = params.m0();
    let delta = params.delta();
    let mean = p - d - d * r + m0 * delta;
    let variance = 2.0 * k + 4.0 * d * r + 2.0 * d * r * r + 4.0 * m0 * delta;
    MomentSummary::from_mean_variance(mean, variance)
}

/// Closed-form mean and variance of the averaged cross-fit law.
pub fn even_crossfit_moments(params: &SplitChiSqParams) -> MomentSummary {
    let (d, p, k) = (params.d() as f64, params.p() as f64, params.k() as f64);
    let r = params.odds();
    let s = r + 1.0 / r;
    let delta = params.delta();
    let mean = p - d - 0.5 * d * s + 0.5 * delta;
    let variance = k * (1.0 + s) + d * (2.0 + s) + 0.5 * d * (r * r + 1.0 / (r * r)) + delta;
    MomentSummary::from_mean_variance(mean, variance)
}

/// Mean and variance of the requested limit law.
///
/// Cross-fit weights other than one half have no closed form here; they go
/// through the quadratic-form cumulants of the stacked construction.
pub fn moments(params: &SplitChiSqParams, variant: LimitVariant) -> Result<MomentSummary> {
    variant.validate()?;
    match variant {
        LimitVariant::Split => Ok(split_moments(params)),
        LimitVariant::CrossFit { w0: 0.5 } => Ok(even_crossfit_moments(params)),
        LimitVariant::CrossFit { w0: 1.0 } => Ok(split_moments(params)),
        LimitVariant::CrossFit { w0 } => {
            let spec = QuadraticFormSpec::weighted_crossfit_construction(params, w0)?;
            quadratic_form_moments(&spec, 2)
        }
    }
}

/// Normal approximation `Φ((x − E Z)/√Var Z)` to the split-law CDF.
pub fn normal_approx_cdf(params: &SplitChiSqParams, x: f64) -> f64 {
    let m = split_moments(params);
    normal_cdf(x, m.mean, m.std_dev())
}
