use crate::error::{Error, Result};
use crate::slrt::{Dataset, ModelDims, SplitModel};
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

/// `N_d(θ, I)` with null hypothesis `θ₁ = … = θ_p = 0`, `p = d − k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GaussianMeanModel {
    d: usize,
    k: usize,
}

impl GaussianMeanModel {
    pub fn new(d: usize, k: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("d", "dimension must be at least 1"));
        }
        if k > d {
            return Err(Error::invalid(
                "k",
                format!("null dimension {k} exceeds d = {d}"),
            ));
        }
        Ok(Self { d, k })
    }

    pub fn p(&self) -> usize {
        self.d - self.k
    }
}

/// Sample mean over `subset`; with `restrict_first = p` the first `p`
/// coordinates are set to zero afterwards.
pub fn gaussian_mle(data: &Dataset, subset: &[usize], restrict_first: usize) -> Result<Vec<f64>> {
    if subset.is_empty() {
        return Err(Error::invalid(
            "subset",
            "cannot estimate a mean from no data",
        ));
    }
    if restrict_first > data.dim() {
        return Err(Error::DimensionMismatch(format!(
            "cannot restrict {restrict_first} of {} coordinates",
            data.dim()
        )));
    }
    let mut mean = vec![0.0; data.dim()];
    for &i in subset {
        for (m, x) in mean.iter_mut().zip(data.row(i)) {
            *m += x;
        }
    }
    let n = subset.len() as f64;
    for (j, m) in mean.iter_mut().enumerate() {
        *m = if j < restrict_first { 0.0 } else { *m / n };
    }
    Ok(mean)
}

impl SplitModel for GaussianMeanModel {
    type Param = Vec<f64>;

    fn dims(&self) -> ModelDims {
        ModelDims {
            d: self.d,
            k: self.k,
        }
    }

    fn log_likelihood(&self, theta: &Vec<f64>, data: &Dataset, subset: &[usize]) -> Result<f64> {
        if theta.len() != self.d || data.dim() != self.d {
            return Err(Error::DimensionMismatch(format!(
                "model has d = {}, got θ of length {} and data of dimension {}",
                self.d,
                theta.len(),
                data.dim()
            )));
        }
        let rss: f64 = subset
            .iter()
            .map(|&i| {
                data.row(i)
                    .iter()
                    .zip(theta)
                    .map(|(x, t)| (x - t) * (x - t))
                    .sum::<f64>()
            })
            .sum();
        Ok(-0.5 * (rss + subset.len() as f64 * self.d as f64 * (2.0 * PI).ln()))
    }

    fn mle_null(&self, data: &Dataset, subset: &[usize]) -> Result<Vec<f64>> {
        gaussian_mle(data, subset, self.p())
    }

    fn mle_full(&self, data: &Dataset, subset: &[usize]) -> Result<Vec<f64>> {
        gaussian_mle(data, subset, 0)
    }

    fn simulate<R: Rng + ?Sized>(&self, theta: &Vec<f64>, n: usize, rng: &mut R) -> Dataset {
        let mut values = Vec::with_capacity(n * self.d);
        for _ in 0..n {
            values.extend(
                theta
                    .iter()
                    .map(|t| t + rng.sample::<f64, _>(StandardNormal)),
            );
        }
        Dataset::new(self.d, values).expect("rows have length d")
    }
}
