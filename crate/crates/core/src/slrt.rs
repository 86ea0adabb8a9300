//! The split likelihood ratio test engine.
//!
//! Data are split into an evaluation part `D0` (`⌊m0·n⌋` points) and an
//! estimation part `D1` (`⌈m1·n⌉` points). The statistic
//!
//! ```text
//! Λ = 2·[ℓ_D0(θ̂_full(D1)) − ℓ_D0(θ̂_null(D0))]
//! ```
//!
//! satisfies `E[exp(Λ/2)] ≤ 1` under the null, so rejecting when
//! `Λ > −2 ln α` is a valid level-α test in finite samples. Convex
//! combinations of the e-values `exp(Λ/2)` keep that property, which is what
//! the cross-fit and subsampling variants rely on.

use crate::error::{Error, Result};
use crate::rng::{seeded_rng, SimRng};
use crate::splitchisq::universal_threshold;
use rand::seq::SliceRandom;
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::fmt;

/// `n` observations in `ℝ^dim`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    values: Vec<f64>,
}

impl Dataset {
    pub fn new(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || !values.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch(format!(
                "{} values do not form rows of length {dim}",
                values.len()
            )));
        }
        Ok(Self { dim, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch(
                "rows have different lengths".into(),
            ));
        }
        Self::new(dim, rows.concat())
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim)
    }

    /// Indices `0..n`.
    pub fn all_indices(&self) -> Vec<usize> {
        (0..self.len()).collect()
    }
}

/// Dimension `d` of the parameter space and `k` of the null hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    pub d: usize,
    pub k: usize,
}

impl ModelDims {
    /// Degrees of freedom `p = d − k`.
    pub fn p(&self) -> usize {
        self.d - self.k
    }
}

/// A parametric model the test can be run on.
///
/// Implementations are shared read-only between worker threads.
pub trait SplitModel: Sync {
    type Param: Clone + Send + Sync + fmt::Debug;

    fn dims(&self) -> ModelDims;

    /// Log-likelihood of the observations indexed by `subset`.
    fn log_likelihood(&self, theta: &Self::Param, data: &Dataset, subset: &[usize]) -> Result<f64>;

    /// Maximizer of the likelihood over the null hypothesis.
    fn mle_null(&self, data: &Dataset, subset: &[usize]) -> Result<Self::Param>;

    /// Maximizer of the likelihood over the full parameter space.
    fn mle_full(&self, data: &Dataset, subset: &[usize]) -> Result<Self::Param>;

    fn simulate<R: Rng + ?Sized>(&self, theta: &Self::Param, n: usize, rng: &mut R) -> Dataset;
}

/// Sizes `(⌊m0·n⌋, n − ⌊m0·n⌋)` of the two parts.
pub fn split_sizes(n: usize, m0: f64) -> Result<(usize, usize)> {
    if !(m0 > 0.0 && m0 < 1.0) {
        return Err(Error::invalid("m0", format!("{m0} is outside (0, 1)")));
    }
    // The offset absorbs representation error in products like 0.29·100.
    let n0 = ((m0 * n as f64) + 1e-9).floor() as usize;
    let n0 = n0.min(n);
    let n1 = n - n0;
    if n0 == 0 || n1 == 0 {
        return Err(Error::EmptySplit { n, m0, n0, n1 });
    }
    Ok((n0, n1))
}

/// A partition of `0..n` into evaluation (`D0`) and estimation (`D1`) indices.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSplit {
    d0: Vec<usize>,
    d1: Vec<usize>,
    m0: f64,
    seed: Option<u64>,
}

impl DataSplit {
    /// First `⌊m0·n⌋` entries of `order` form `D0`, the rest `D1`.
    pub fn from_order(order: &[usize], m0: f64) -> Result<Self> {
        let (n0, _) = split_sizes(order.len(), m0)?;
        Ok(Self {
            d0: order[..n0].to_vec(),
            d1: order[n0..].to_vec(),
            m0,
            seed: None,
        })
    }

    pub fn d0(&self) -> &[usize] {
        &self.d0
    }

    pub fn d1(&self) -> &[usize] {
        &self.d1
    }

    pub fn m0(&self) -> f64 {
        self.m0
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// The same partition with the roles of the two parts exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            d0: self.d1.clone(),
            d1: self.d0.clone(),
            m0: 1.0 - self.m0,
            seed: self.seed,
        }
    }
}

/// Uniformly random split drawn from `rng`.
pub fn split_with_rng<R: Rng + ?Sized>(n: usize, m0: f64, rng: &mut R) -> Result<DataSplit> {
    if n < 2 {
        return Err(Error::invalid("n", format!("cannot split {n} points")));
    }
    split_sizes(n, m0)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    DataSplit::from_order(&order, m0)
}

/// Uniformly random split, deterministic in `seed`.
pub fn split_data(n: usize, m0: f64, seed: u64) -> Result<DataSplit> {
    let mut split = split_with_rng(n, m0, &mut seeded_rng(seed))?;
    split.seed = Some(seed);
    Ok(split)
}

/// `2·[ℓ_eval(θ̂_full(est)) − ℓ_eval(θ̂_null(eval))]`.
pub fn split_lambda<M: SplitModel>(
    model: &M,
    data: &Dataset,
    eval: &[usize],
    est: &[usize],
) -> Result<f64> {
    if eval.is_empty() || est.is_empty() {
        return Err(Error::invalid("split", "both parts must be nonempty"));
    }
    let fitted = model.mle_full(data, est)?;
    let null = model.mle_null(data, eval)?;
    Ok(2.0
        * (model.log_likelihood(&fitted, data, eval)? - model.log_likelihood(&null, data, eval)?))
}

/// The split likelihood ratio statistic `Λ` for `split`.
pub fn slrt_statistic<M: SplitModel>(model: &M, data: &Dataset, split: &DataSplit) -> Result<f64> {
    split_lambda(model, data, split.d0(), split.d1())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestVariant {
    Plain,
    CrossFit,
    Subsample,
    Classical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlrtResult {
    /// The statistic compared with `threshold`.
    pub statistic: f64,
    /// `Λ` of the first (or only) split.
    pub lambda: f64,
    pub lambda_swap: Option<f64>,
    /// `Λ` for every split of a subsampling run.
    pub components: Vec<f64>,
    pub weight_w0: f64,
    pub threshold: f64,
    pub reject: bool,
    pub variant: TestVariant,
    pub n_subsamples: usize,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            "alpha",
            format!("{alpha} is outside (0, 1)"),
        ))
    }
}

/// Universal-threshold test on one split.
pub fn slrt_test<M: SplitModel>(
    model: &M,
    data: &Dataset,
    split: &DataSplit,
    alpha: f64,
) -> Result<SlrtResult> {
    check_alpha(alpha)?;
    let lambda = slrt_statistic(model, data, split)?;
    let threshold = universal_threshold(alpha);
    Ok(SlrtResult {
        statistic: lambda,
        lambda,
        lambda_swap: None,
        components: vec![lambda],
        weight_w0: 1.0,
        threshold,
        reject: lambda > threshold,
        variant: TestVariant::Plain,
        n_subsamples: 1,
    })
}

/// Weighted cross-fit test `w0·Λ + (1 − w0)·Λ_swap`. The weight must not
/// depend on the data.
pub fn crossfit_statistic<M: SplitModel>(
    model: &M,
    data: &Dataset,
    split: &DataSplit,
    w0: f64,
    alpha: f64,
) -> Result<SlrtResult> {
    check_alpha(alpha)?;
    if !(0.0..=1.0).contains(&w0) {
        return Err(Error::invalid(
            "w0",
            format!("weight {w0} is outside [0, 1]"),
        ));
    }
    let lambda = split_lambda(model, data, split.d0(), split.d1())?;
    let lambda_swap = split_lambda(model, data, split.d1(), split.d0())?;
    Ok(crossfit_result(lambda, lambda_swap, w0, alpha))
}

/// Assemble a cross-fit result from precomputed statistics.
pub fn crossfit_result(lambda: f64, lambda_swap: f64, w0: f64, alpha: f64) -> SlrtResult {
    let statistic = if w0 == 1.0 {
        lambda
    } else {
        w0 * lambda + (1.0 - w0) * lambda_swap
    };
    let threshold = universal_threshold(alpha);
    SlrtResult {
        statistic,
        lambda,
        lambda_swap: Some(lambda_swap),
        components: vec![lambda, lambda_swap],
        weight_w0: w0,
        threshold,
        reject: statistic > threshold,
        variant: TestVariant::CrossFit,
        n_subsamples: 1,
    }
}

/// `2·ln(mean_j exp(Λⱼ/2))`, evaluated in log-sum-exp form.
pub fn log_mean_evalue_statistic(lambdas: &[f64]) -> f64 {
    let half_max = lambdas
        .iter()
        .fold(f64::NEG_INFINITY, |m, &l| m.max(0.5 * l));
    if !half_max.is_finite() {
        return 2.0 * half_max;
    }
    let sum: f64 = lambdas.iter().map(|&l| (0.5 * l - half_max).exp()).sum();
    2.0 * (half_max + (sum / lambdas.len() as f64).ln())
}

/// Assemble a subsampling result from per-split statistics.
pub fn subsample_result(lambdas: Vec<f64>, alpha: f64) -> SlrtResult {
    let statistic = if lambdas.len() == 1 {
        lambdas[0]
    } else {
        log_mean_evalue_statistic(&lambdas)
    };
    let threshold = universal_threshold(alpha);
    SlrtResult {
        statistic,
        lambda: lambdas[0],
        lambda_swap: None,
        weight_w0: 1.0,
        threshold,
        reject: statistic > threshold,
        variant: TestVariant::Subsample,
        n_subsamples: lambdas.len(),
        components: lambdas,
    }
}

/// Average the e-values `exp(Λⱼ/2)` of `n_subsamples` independent random
/// splits and reject when the mean exceeds `1/α`. The reported statistic is
/// `2·ln(mean e-value)`, on the same scale as `Λ`. The first split is the
/// one [`split_data`] draws for `seed`.
pub fn subsample_statistic<M: SplitModel>(
    model: &M,
    data: &Dataset,
    m0: f64,
    n_subsamples: usize,
    alpha: f64,
    seed: u64,
) -> Result<SlrtResult> {
    check_alpha(alpha)?;
    if n_subsamples == 0 {
        return Err(Error::invalid("n_subsamples", "need at least one split"));
    }
    let mut rng: SimRng = seeded_rng(seed);
    let mut lambdas = Vec::with_capacity(n_subsamples);
    for _ in 0..n_subsamples {
        let split = split_with_rng(data.len(), m0, &mut rng)?;
        lambdas.push(slrt_statistic(model, data, &split)?);
    }
    Ok(subsample_result(lambdas, alpha))
}

/// Classical likelihood ratio test on all data with the `χ²_p` critical value.
pub fn classical_lrt<M: SplitModel>(model: &M, data: &Dataset, alpha: f64) -> Result<SlrtResult> {
    check_alpha(alpha)?;
    let all = data.all_indices();
    let full = model.mle_full(data, &all)?;
    let null = model.mle_null(data, &all)?;
    let statistic = 2.0
        * (model.log_likelihood(&full, data, &all)? - model.log_likelihood(&null, data, &all)?);
    let threshold = chi_square_critical_value(model.dims().p(), alpha)?;
    Ok(SlrtResult {
        statistic,
        lambda: statistic,
        lambda_swap: None,
        components: vec![statistic],
        weight_w0: 1.0,
        threshold,
        reject: statistic > threshold,
        variant: TestVariant::Classical,
        n_subsamples: 1,
    })
}

/// Upper-α quantile of `χ²_p`; infinite for `p = 0`.
pub fn chi_square_critical_value(p: usize, alpha: f64) -> Result<f64> {
    if p == 0 {
        return Ok(f64::INFINITY);
    }
    let dist = ChiSquared::new(p as f64).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(dist.inverse_cdf(1.0 - alpha))
}
