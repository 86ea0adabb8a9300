//! Choosing the splitting ratio `m0`.
//!
//! The data-driven methods all follow the same loop: fix a noncentrality
//! `δ`, find the `m0` that maximizes the asymptotic power of the universal
//! test at `δ`, and grow `δ` until that best power reaches the target. The
//! methods differ only in how the power at `(m0, δ)` is evaluated.

use crate::error::{Error, Result};
use crate::splitchisq::{
    normal_approx_cdf, universal_threshold, LimitBank, LimitVariant, SplitChiSqParams, M0_DOMAIN,
};
use rayon::prelude::*;
use std::fmt;
use std::str::FromStr;

/// Multiplicative growth of the noncentrality during the search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaSchedule {
    /// Starting value; `None` means `max(1, p)`.
    pub initial: Option<f64>,
    pub factor: f64,
    /// Searches that pass this value without reaching the target fail.
    pub cap: f64,
}

impl Default for DeltaSchedule {
    fn default() -> Self {
        Self {
            initial: None,
            factor: 1.25,
            cap: 1e9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitSearchConfig {
    pub grid_step: f64,
    pub m0_range: (f64, f64),
    pub target_power: f64,
    pub alpha: f64,
    pub schedule: DeltaSchedule,
    /// After the schedule brackets the target, bisect `δ` down to the
    /// smallest value whose best power still reaches it.
    pub refine_delta: bool,
    /// Monte Carlo methods only.
    pub n_reps: usize,
    pub seed: u64,
}

impl Default for SplitSearchConfig {
    fn default() -> Self {
        Self {
            grid_step: 0.01,
            m0_range: (0.05, 0.95),
            target_power: 0.8,
            alpha: 0.05,
            schedule: DeltaSchedule::default(),
            refine_delta: true,
            n_reps: crate::splitchisq::DEFAULT_LIMIT_REPS,
            seed: 0,
        }
    }
}

impl SplitSearchConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.m0_range;
        if !(lo >= M0_DOMAIN.0 && hi <= M0_DOMAIN.1 && lo < hi) {
            return Err(Error::invalid(
                "m0_range",
                format!(
                    "[{lo}, {hi}] must be an interval inside [{}, {}]",
                    M0_DOMAIN.0, M0_DOMAIN.1
                ),
            ));
        }
        if !(self.grid_step > 0.0 && self.grid_step < hi - lo) {
            return Err(Error::invalid(
                "grid_step",
                format!("{} does not fit [{lo}, {hi}]", self.grid_step),
            ));
        }
        if !(self.target_power > 0.0 && self.target_power < 1.0) {
            return Err(Error::invalid(
                "target_power",
                format!("{} is outside (0, 1)", self.target_power),
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(
                "alpha",
                format!("{} is outside (0, 1)", self.alpha),
            ));
        }
        let s = &self.schedule;
        if !(s.factor > 1.0 && s.cap > 0.0) || s.initial.is_some_and(|v| !(v > 0.0)) {
            return Err(Error::invalid(
                "schedule",
                format!("{s:?} is not a growing positive schedule"),
            ));
        }
        if self.n_reps == 0 {
            return Err(Error::invalid("n_reps", "need at least one replication"));
        }
        Ok(())
    }

    /// The `m0` grid, endpoints included.
    pub fn grid(&self) -> Vec<f64> {
        let (lo, hi) = self.m0_range;
        let n = ((hi - lo) / self.grid_step + 1e-9).floor() as usize;
        (0..=n).map(|i| lo + i as f64 * self.grid_step).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SplitMethod {
    /// Normal approximation of the split law from its closed-form moments.
    NormalApprox,
    /// Monte Carlo power of the split law on a grid.
    MonteCarlo,
    /// Minimizer of the squared radius of the Gaussian-mean confidence set.
    RadiusMinimizing,
    /// Fitted curve in `k/d`.
    RuleOfThumb,
    /// Monte Carlo power of the averaged cross-fit law.
    CrossFit,
}

impl SplitMethod {
    pub const ALL: [SplitMethod; 5] = [
        SplitMethod::NormalApprox,
        SplitMethod::MonteCarlo,
        SplitMethod::RadiusMinimizing,
        SplitMethod::RuleOfThumb,
        SplitMethod::CrossFit,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SplitMethod::NormalApprox => "normal",
            SplitMethod::MonteCarlo => "mc",
            SplitMethod::RadiusMinimizing => "radius",
            SplitMethod::RuleOfThumb => "thumb",
            SplitMethod::CrossFit => "crossfit",
        }
    }
}

impl fmt::Display for SplitMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SplitMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SplitMethod::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::invalid("method", format!("unknown splitting method `{s}`")))
    }
}

/// Best split found at one noncentrality on the growth schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedulePoint {
    pub delta: f64,
    pub m0: f64,
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitRatioResult {
    pub m0_opt: f64,
    pub achieved_power: f64,
    pub delta_used: f64,
    pub method: SplitMethod,
    /// Points visited by the multiplicative schedule (bisection steps not included).
    pub schedule: Vec<SchedulePoint>,
}

fn check_dims(d: usize, p: usize) -> Result<()> {
    SplitChiSqParams::central(d, p, 0.5)?;
    if p == 0 {
        return Err(Error::NonConvergence(
            "p = 0 leaves no constrained direction, so power cannot grow with delta".into(),
        ));
    }
    Ok(())
}

/// Index of the smallest value; ties go to the lowest index.
fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// Golden-section minimization of `f` on `[a, b]` to bracket width `tol`.
pub fn golden_section_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Width of the final golden-section bracket.
pub const REFINE_TOL: f64 = 1e-5;

/// Grid scan followed by golden-section refinement inside the neighbouring
/// grid cells. Returns `(m0, f(m0))`; the refined point stays within one
/// grid step of the coarse argmin.
pub fn grid_then_golden<F: Fn(f64) -> f64>(f: F, grid: &[f64], range: (f64, f64)) -> (f64, f64) {
    let values: Vec<f64> = grid.iter().map(|&m| f(m)).collect();
    let i = argmin(&values);
    let lo = if i == 0 { range.0 } else { grid[i - 1] };
    let hi = if i + 1 == grid.len() {
        range.1
    } else {
        grid[i + 1]
    };
    let (m, v) = golden_section_min(&f, lo, hi, REFINE_TOL);
    if v < values[i] {
        (m, v)
    } else {
        (grid[i], values[i])
    }
}

/// Shared noncentrality search. `best_at(δ)` returns the best `(m0, power)`.
fn search<F>(
    d: usize,
    p: usize,
    config: &SplitSearchConfig,
    method: SplitMethod,
    rel_tol: f64,
    best_at: F,
) -> Result<SplitRatioResult>
where
    F: Fn(f64) -> Result<(f64, f64)>,
{
    config.validate()?;
    check_dims(d, p)?;
    let sched = config.schedule;
    let mut delta = sched.initial.unwrap_or((p as f64).max(1.0));
    let mut lower = 0.0;
    let mut schedule = Vec::new();
    let (mut m0, mut power) = loop {
        if delta > sched.cap {
            return Err(Error::NonConvergence(format!(
                "{method}: power stayed below {} up to delta = {}",
                config.target_power, sched.cap
            )));
        }
        let (m, pw) = best_at(delta)?;
        schedule.push(SchedulePoint {
            delta,
            m0: m,
            power: pw,
        });
        if pw >= config.target_power {
            break (m, pw);
        }
        lower = delta;
        delta *= sched.factor;
    };
    if config.refine_delta {
        let mut upper = delta;
        for _ in 0..200 {
            if upper - lower <= rel_tol * upper {
                break;
            }
            let mid = 0.5 * (lower + upper);
            let (m, pw) = best_at(mid)?;
            if pw >= config.target_power {
                upper = mid;
                m0 = m;
                power = pw;
            } else {
                lower = mid;
            }
        }
        delta = upper;
    }
    Ok(SplitRatioResult {
        m0_opt: m0,
        achieved_power: power,
        delta_used: delta,
        method,
        schedule,
    })
}

/// Best `m0` by the normal approximation at a fixed `δ`: the minimizer of
/// `Φ((−2 ln α − E Z)/√Var Z)`, with its power.
pub fn normal_best_split(
    d: usize,
    p: usize,
    delta: f64,
    config: &SplitSearchConfig,
) -> Result<(f64, f64)> {
    let base = SplitChiSqParams::new(d, p, 0.5, delta)?;
    let t = universal_threshold(config.alpha);
    let cdf = |m0: f64| match base.with_m0(m0) {
        Ok(pr) => normal_approx_cdf(&pr, t),
        Err(_) => f64::INFINITY,
    };
    let (m0, value) = grid_then_golden(cdf, &config.grid(), config.m0_range);
    Ok((m0, 1.0 - value))
}

/// Splitting ratio from the normal approximation of the split law.
pub fn optimal_split_normal(
    d: usize,
    p: usize,
    config: &SplitSearchConfig,
) -> Result<SplitRatioResult> {
    search(d, p, config, SplitMethod::NormalApprox, 1e-9, |delta| {
        normal_best_split(d, p, delta, config)
    })
}

/// Grid argmax of Monte Carlo power on a fixed bank; ties go to smaller `m0`.
pub fn mc_best_split(
    bank: &LimitBank,
    delta: f64,
    variant: LimitVariant,
    config: &SplitSearchConfig,
) -> Result<(f64, f64)> {
    let t = universal_threshold(config.alpha);
    let grid = config.grid();
    let powers = grid
        .par_iter()
        .map(|&m0| bank.power(m0, delta, variant, t).map(|e| e.estimate))
        .collect::<Result<Vec<f64>>>()?;
    let neg: Vec<f64> = powers.iter().map(|v| -v).collect();
    let i = argmin(&neg);
    Ok((grid[i], powers[i]))
}

fn mc_search(
    d: usize,
    p: usize,
    config: &SplitSearchConfig,
    variant: LimitVariant,
    method: SplitMethod,
) -> Result<SplitRatioResult> {
    config.validate()?;
    check_dims(d, p)?;
    let bank = LimitBank::generate(d, p, config.n_reps, config.seed)?;
    search(d, p, config, method, 1e-6, |delta| {
        mc_best_split(&bank, delta, variant, config)
    })
}

/// Splitting ratio from Monte Carlo power of the split law. One bank of
/// draws is shared by every grid point and every `δ`.
pub fn optimal_split_mc(
    d: usize,
    p: usize,
    config: &SplitSearchConfig,
) -> Result<SplitRatioResult> {
    mc_search(d, p, config, LimitVariant::Split, SplitMethod::MonteCarlo)
}

/// Splitting ratio for the averaged cross-fit test.
pub fn optimal_split_crossfit(
    d: usize,
    p: usize,
    config: &SplitSearchConfig,
) -> Result<SplitRatioResult> {
    mc_search(
        d,
        p,
        config,
        LimitVariant::EVEN_CROSSFIT,
        SplitMethod::CrossFit,
    )
}

/// `m0 = 1 − (√(4d² + 8d·ln(1/α)) − 2d) / (4·ln(1/α))`, the split that
/// minimizes the squared radius of the universal confidence set for a
/// Gaussian mean; written in a cancellation-free form.
pub fn confidence_radius_split(d: usize, alpha: f64) -> Result<f64> {
    if d == 0 {
        return Err(Error::invalid("d", "dimension must be positive"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(
            "alpha",
            format!("{alpha} is outside (0, 1)"),
        ));
    }
    let d = d as f64;
    let l = (1.0 / alpha).ln();
    let root = (4.0 * d * d + 8.0 * d * l).sqrt();
    Ok(1.0 - 2.0 * d / (root + 2.0 * d))
}

/// `m0 = 0.52 − exp(−2.7·k/d − 1.05)`.
pub fn rule_of_thumb_split(d: usize, k: usize) -> Result<f64> {
    if d == 0 || k > d {
        return Err(Error::invalid(
            "k",
            format!("need 0 <= k <= d with d >= 1, got d = {d}, k = {k}"),
        ));
    }
    let ratio = k as f64 / d as f64;
    Ok(0.52 - (-2.7 * ratio - 1.05).exp())
}

/// Run any method. The closed-form splits report the normal-approximation
/// power at the noncentrality calibrated by [`optimal_split_normal`], so
/// every method's output is on the same footing.
pub fn optimal_split(
    method: SplitMethod,
    d: usize,
    k: usize,
    config: &SplitSearchConfig,
) -> Result<SplitRatioResult> {
    if k > d {
        return Err(Error::invalid("k", format!("k = {k} exceeds d = {d}")));
    }
    let p = d - k;
    match method {
        SplitMethod::NormalApprox => optimal_split_normal(d, p, config),
        SplitMethod::MonteCarlo => optimal_split_mc(d, p, config),
        SplitMethod::CrossFit => optimal_split_crossfit(d, p, config),
        SplitMethod::RadiusMinimizing | SplitMethod::RuleOfThumb => {
            let m0 = match method {
                SplitMethod::RadiusMinimizing => confidence_radius_split(d, config.alpha)?,
                _ => rule_of_thumb_split(d, k)?,
            };
            let reference = optimal_split_normal(d, p, config)?;
            let params = SplitChiSqParams::new(d, p, m0, reference.delta_used)?;
            let power = 1.0 - normal_approx_cdf(&params, universal_threshold(config.alpha));
            Ok(SplitRatioResult {
                m0_opt: m0,
                achieved_power: power,
                delta_used: reference.delta_used,
                method,
                schedule: Vec::new(),
            })
        }
    }
}
