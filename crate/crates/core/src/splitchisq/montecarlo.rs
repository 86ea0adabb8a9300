//! Monte Carlo CDF and quantile estimates for the split chi-square laws.
//!
//! A draw depends on `(X, Y)` only through seven scalars, so a
//! [`LimitBank`] stores those per replication and re-evaluates every
//! `(m0, δ)` from the same underlying normals. That gives exact draws and
//! common random numbers across a whole `m0` grid at the cost of one pass
//! of normal generation.

use super::params::{LimitVariant, SplitChiSqParams};
use super::sampler::fill_normals;
use crate::error::{Error, Result};
use crate::rng::replication_rng;
use rayon::prelude::*;

/// Default replication count for limit-law Monte Carlo.
pub const DEFAULT_LIMIT_REPS: usize = 100_000;

/// Fraction estimate with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub n: usize,
}

impl McEstimate {
    pub fn from_count(count: usize, n: usize) -> Self {
        let estimate = count as f64 / n as f64;
        Self {
            estimate,
            std_error: (estimate * (1.0 - estimate) / n as f64).sqrt(),
            n,
        }
    }
}

/// Fraction of `draws` that are `<= x`.
pub fn empirical_cdf(draws: &[f64], x: f64) -> Result<McEstimate> {
    if draws.is_empty() {
        return Err(Error::invalid("n_reps", "need at least one draw"));
    }
    let count = draws.iter().filter(|&&z| z <= x).count();
    Ok(McEstimate::from_count(count, draws.len()))
}

/// Upper order-statistic quantile: the `⌈prob·n⌉`-th smallest draw.
pub fn order_statistic_quantile(draws: &[f64], prob: f64) -> Result<f64> {
    if !(prob > 0.0 && prob < 1.0) {
        return Err(Error::invalid("prob", format!("{prob} is outside (0, 1)")));
    }
    let n = draws.len();
    if (n as f64) < 1.0 / prob.min(1.0 - prob) {
        return Err(Error::invalid(
            "n_reps",
            format!("{n} draws cannot resolve the {prob} quantile"),
        ));
    }
    // The small offset keeps products such as 0.95·100000 from rounding up.
    let rank = ((prob * n as f64) - 1e-9).ceil().max(1.0) as usize;
    let mut sorted = draws.to_vec();
    let (_, value, _) = sorted.select_nth_unstable_by(rank - 1, f64::total_cmp);
    Ok(*value)
}

/// Per-replication summary of a standard normal pair `(X, Y)` in `ℝᵈ`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct PairSummary {
    /// First coordinates (zero when `p = 0`).
    x1: f64,
    y1: f64,
    /// Squared norms over the last `k` coordinates.
    xk: f64,
    yk: f64,
    xx: f64,
    yy: f64,
    xy: f64,
}

impl PairSummary {
    fn new(x: &[f64], y: &[f64], p: usize) -> Self {
        let mut s = PairSummary::default();
        if p > 0 {
            s.x1 = x[0];
            s.y1 = y[0];
        }
        for (i, (&xi, &yi)) in x.iter().zip(y).enumerate() {
            s.xx += xi * xi;
            s.yy += yi * yi;
            s.xy += xi * yi;
            if i >= p {
                s.xk += xi * xi;
                s.yk += yi * yi;
            }
        }
        s
    }
}

/// Precomputed coefficient set for evaluating one `(m0, δ, variant)`.
#[derive(Debug, Clone, Copy)]
struct Evaluator {
    forward: [f64; 6],
    swapped: [f64; 6],
    w0: f64,
}

impl Evaluator {
    fn new(m0: f64, delta: f64, variant: LimitVariant) -> Self {
        let m1 = 1.0 - m0;
        let c0 = (m0 / m1).sqrt();
        let c1 = (m1 / m0).sqrt();
        // [shift·first, constant, −tail, xy, −xx, −yy]
        let forward = [
            2.0 * (m0 * delta).sqrt(),
            m0 * delta,
            1.0,
            2.0 * c0,
            0.0,
            c0 * c0,
        ];
        let swapped = [
            2.0 * (m1 * delta).sqrt(),
            m1 * delta,
            1.0,
            2.0 * c1,
            c1 * c1,
            0.0,
        ];
        let w0 = match variant {
            LimitVariant::Split => 1.0,
            LimitVariant::CrossFit { w0 } => w0,
        };
        Self {
            forward,
            swapped,
            w0,
        }
    }

    #[inline]
    fn eval(&self, s: &PairSummary) -> f64 {
        let f = &self.forward;
        let z0 = f[0] * s.x1 + f[1] - f[2] * s.xk + f[3] * s.xy - f[5] * s.yy;
        if self.w0 == 1.0 {
            return z0;
        }
        let g = &self.swapped;
        let z1 = g[0] * s.y1 + g[1] - g[2] * s.yk + g[3] * s.xy - g[4] * s.xx;
        self.w0 * z0 + (1.0 - self.w0) * z1
    }
}

/// Stored pair summaries for `n_reps` replications at fixed `(d, p, seed)`.
///
/// Replication `i` uses the stream `replication_rng(seed, i)` and therefore
/// equals `sample_limit(params, variant, &mut replication_rng(seed, i))` up
/// to rounding.
#[derive(Debug, Clone)]
pub struct LimitBank {
    d: usize,
    p: usize,
    seed: u64,
    rows: Vec<PairSummary>,
}

impl LimitBank {
    pub fn generate(d: usize, p: usize, n_reps: usize, seed: u64) -> Result<Self> {
        SplitChiSqParams::central(d, p, 0.5)?;
        if n_reps == 0 {
            return Err(Error::invalid("n_reps", "need at least one replication"));
        }
        let rows = (0..n_reps as u64)
            .into_par_iter()
            .map_init(
                || (vec![0.0; d], vec![0.0; d]),
                |(x, y), i| {
                    let mut rng = replication_rng(seed, i);
                    fill_normals(x, &mut rng);
                    fill_normals(y, &mut rng);
                    PairSummary::new(x, y, p)
                },
            )
            .collect();
        Ok(Self { d, p, seed, rows })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn check(&self, m0: f64, delta: f64, variant: LimitVariant) -> Result<Evaluator> {
        SplitChiSqParams::new(self.d, self.p, m0, delta)?;
        variant.validate()?;
        Ok(Evaluator::new(m0, delta, variant))
    }

    /// All draws of the requested law.
    pub fn draws(&self, m0: f64, delta: f64, variant: LimitVariant) -> Result<Vec<f64>> {
        let ev = self.check(m0, delta, variant)?;
        Ok(self.rows.iter().map(|s| ev.eval(s)).collect())
    }

    /// Per-replication indicators of `Z > threshold`.
    pub fn exceedances(
        &self,
        m0: f64,
        delta: f64,
        variant: LimitVariant,
        threshold: f64,
    ) -> Result<Vec<bool>> {
        let ev = self.check(m0, delta, variant)?;
        Ok(self.rows.iter().map(|s| ev.eval(s) > threshold).collect())
    }

    /// Estimated `P(Z > threshold)`.
    pub fn power(
        &self,
        m0: f64,
        delta: f64,
        variant: LimitVariant,
        threshold: f64,
    ) -> Result<McEstimate> {
        let ev = self.check(m0, delta, variant)?;
        let count = self.rows.iter().filter(|s| ev.eval(s) > threshold).count();
        Ok(McEstimate::from_count(count, self.rows.len()))
    }
}

/// Monte Carlo estimate of `P(Z <= x)` for the requested law.
pub fn mc_cdf(
    params: &SplitChiSqParams,
    variant: LimitVariant,
    x: f64,
    n_reps: usize,
    seed: u64,
) -> Result<McEstimate> {
    let bank = LimitBank::generate(params.d(), params.p(), n_reps, seed)?;
    empirical_cdf(&bank.draws(params.m0(), params.delta(), variant)?, x)
}

/// Monte Carlo order-statistic quantile of the requested law.
pub fn mc_quantile(
    params: &SplitChiSqParams,
    variant: LimitVariant,
    prob: f64,
    n_reps: usize,
    seed: u64,
) -> Result<f64> {
    if !(prob > 0.0 && prob < 1.0) {
        return Err(Error::invalid("prob", format!("{prob} is outside (0, 1)")));
    }
    let bank = LimitBank::generate(params.d(), params.p(), n_reps, seed)?;
    order_statistic_quantile(&bank.draws(params.m0(), params.delta(), variant)?, prob)
}

/// Two-sample Kolmogorov–Smirnov distance `sup |F_a − F_b|`.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("samples", "both samples must be non-empty"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable_by(f64::total_cmp);
    b.sort_unstable_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut dist) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        // Step past every copy of the smaller value so ties move together.
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        dist = dist.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(dist)
}

/// Asymptotic two-sample KS critical value at level `alpha`:
/// `√(−ln(α/2)/2) · √((n + m)/(n·m))`.
pub fn ks_critical_value(n: usize, m: usize, alpha: f64) -> Result<f64> {
    if n == 0 || m == 0 {
        return Err(Error::invalid("samples", "both samples must be non-empty"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(
            "alpha",
            format!("{alpha} is outside (0, 1)"),
        ));
    }
    let (n, m) = (n as f64, m as f64);
    Ok((-(alpha / 2.0).ln() / 2.0).sqrt() * ((n + m) / (n * m)).sqrt())
}
