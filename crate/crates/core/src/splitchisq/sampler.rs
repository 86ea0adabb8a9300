//! Exact draws from the split chi-square limit laws.
//!
//! Each draw consumes `2d` standard normals from the stream, first the `d`
//! coordinates of `X` and then the `d` coordinates of `Y`. The Monte Carlo
//! bank in [`super::montecarlo`] consumes streams in the same order.

use super::params::{LimitVariant, SplitChiSqParams};
use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;

pub(crate) fn fill_normals<R: Rng + ?Sized>(buf: &mut [f64], rng: &mut R) {
    for v in buf.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
}

/// `‖x₍ₚ₎ + √m0·h‖² − ‖x − √(m0/m1)·y‖²` with `h` given on the first `p`
/// coordinates.
pub(crate) fn split_form(x: &[f64], y: &[f64], h: &[f64], m0: f64) -> f64 {
    let p = h.len();
    let shift = m0.sqrt();
    let c = (m0 / (1.0 - m0)).sqrt();
    let fitted: f64 = x[..p]
        .iter()
        .zip(h)
        .map(|(xi, hi)| {
            let v = xi + shift * hi;
            v * v
        })
        .sum();
    let gap: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| {
            let v = xi - c * yi;
            v * v
        })
        .sum();
    fitted - gap
}

fn canonical_direction(params: &SplitChiSqParams) -> Vec<f64> {
    let mut h = vec![0.0; params.p()];
    if let Some(first) = h.first_mut() {
        *first = params.delta().sqrt();
    }
    h
}

fn draw_pair<R: Rng + ?Sized>(d: usize, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; d];
    let mut y = vec![0.0; d];
    fill_normals(&mut x, rng);
    fill_normals(&mut y, rng);
    (x, y)
}

fn combine(
    params: &SplitChiSqParams,
    variant: LimitVariant,
    x: &[f64],
    y: &[f64],
    h: &[f64],
) -> f64 {
    match variant {
        LimitVariant::Split => split_form(x, y, h, params.m0()),
        LimitVariant::CrossFit { w0 } => {
            let forward = split_form(x, y, h, params.m0());
            let swapped = split_form(y, x, h, params.m1());
            w0 * forward + (1.0 - w0) * swapped
        }
    }
}

/// One draw from `split_{m0}-χ²_{p,d}(δ)`, with `h = (√δ, 0, …, 0)`.
pub fn sample_split_chisq<R: Rng + ?Sized>(params: &SplitChiSqParams, rng: &mut R) -> f64 {
    let (x, y) = draw_pair(params.d(), rng);
    split_form(&x, &y, &canonical_direction(params), params.m0())
}

/// One draw of the averaged cross-fit limit law. The forward and swapped
/// terms share the same `(X, Y)`.
pub fn sample_crossfit_limit<R: Rng + ?Sized>(params: &SplitChiSqParams, rng: &mut R) -> f64 {
    sample_limit(params, LimitVariant::EVEN_CROSSFIT, rng)
}

/// One draw of either limit law. The cross-fit weight is not checked here;
/// build it with [`LimitVariant::crossfit`].
pub fn sample_limit<R: Rng + ?Sized>(
    params: &SplitChiSqParams,
    variant: LimitVariant,
    rng: &mut R,
) -> f64 {
    let (x, y) = draw_pair(params.d(), rng);
    combine(params, variant, &x, &y, &canonical_direction(params))
}

/// Draw with an explicit direction `h ∈ ℝᵖ`; `‖h‖²` must equal `δ`.
pub fn sample_limit_along<R: Rng + ?Sized>(
    params: &SplitChiSqParams,
    variant: LimitVariant,
    h: &[f64],
    rng: &mut R,
) -> Result<f64> {
    variant.validate()?;
    if h.len() != params.p() {
        return Err(Error::DimensionMismatch(format!(
            "direction has length {}, expected p = {}",
            h.len(),
            params.p()
        )));
    }
    let norm2: f64 = h.iter().map(|v| v * v).sum();
    if (norm2 - params.delta()).abs() > 1e-9 * (1.0 + params.delta()) {
        return Err(Error::invalid(
            "h",
            format!("squared norm {norm2} differs from delta {}", params.delta()),
        ));
    }
    let (x, y) = draw_pair(params.d(), rng);
    Ok(combine(params, variant, &x, &y, h))
}
