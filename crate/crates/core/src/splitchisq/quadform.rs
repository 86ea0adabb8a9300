//! Moments of Gaussian quadratic forms `scale·(ε + μ)ᵀA(ε + μ)` with
//! `ε ~ N(0, Σ)`, computed from the trace formula for cumulants
//!
//! ```text
//! κₙ = scaleⁿ · 2ⁿ⁻¹(n−1)! · ( tr[(AΣ)ⁿ] + n·μᵀ(AΣ)ⁿ⁻¹Aμ )
//! ```
//!
//! and the usual cumulant-to-moment conversion. The split chi-square laws
//! are quadratic forms of this kind, which makes this module an independent
//! check on the closed-form moments.

use super::moments::MomentSummary;
use super::params::SplitChiSqParams;
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// A quadratic form in a shifted Gaussian vector.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticFormSpec {
    a: DMatrix<f64>,
    covariance: DMatrix<f64>,
    mu: DVector<f64>,
    scale: f64,
}

impl QuadraticFormSpec {
    pub fn new(
        a: DMatrix<f64>,
        covariance: DMatrix<f64>,
        mu: DVector<f64>,
        scale: f64,
    ) -> Result<Self> {
        let m = a.nrows();
        if a.ncols() != m || covariance.nrows() != m || covariance.ncols() != m || mu.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "A is {}x{}, covariance {}x{}, mu has length {}",
                a.nrows(),
                a.ncols(),
                covariance.nrows(),
                covariance.ncols(),
                mu.len()
            )));
        }
        if !scale.is_finite() {
            return Err(Error::invalid("scale", "must be finite"));
        }
        let tol = |mat: &DMatrix<f64>| 1e-12 * mat.amax().max(1.0);
        if (&a - a.transpose()).amax() > tol(&a) {
            return Err(Error::invalid("A", "matrix is not symmetric"));
        }
        if (&covariance - covariance.transpose()).amax() > tol(&covariance) {
            return Err(Error::invalid("covariance", "matrix is not symmetric"));
        }
        if covariance.clone().cholesky().is_none() {
            return Err(Error::invalid(
                "covariance",
                "matrix is not positive definite",
            ));
        }
        Ok(Self {
            a,
            covariance,
            mu,
            scale,
        })
    }

    /// Representation of `split_{m0}-χ²_{p,d}(δ)` as `m0·(ε + μ)ᵀA(ε + μ)`,
    /// with `ε ~ N(0, diag(m0⁻¹I_d, m1⁻¹I_d))` and `μ = (h, 0, h, 0)`.
    pub fn split_construction(params: &SplitChiSqParams) -> Self {
        let blocks = Blocks::new(params);
        Self {
            a: blocks.forward(),
            covariance: blocks.covariance(params),
            mu: blocks.shift(params),
            scale: params.m0(),
        }
    }

    /// Representation of `w0·Λ + (1 − w0)·Λ_swap` in the same ε as
    /// [`Self::split_construction`]; the swapped statistic equals
    /// `m1·(‖u₃‖² − ‖u₁ − u₃‖² − ‖u₂ − u₄‖²)` in the block coordinates of
    /// `u = ε + μ`.
    pub fn weighted_crossfit_construction(params: &SplitChiSqParams, w0: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&w0) {
            return Err(Error::invalid(
                "w0",
                format!("weight {w0} is outside [0, 1]"),
            ));
        }
        let blocks = Blocks::new(params);
        let a =
            blocks.forward() * (w0 * params.m0()) + blocks.swapped() * ((1.0 - w0) * params.m1());
        Ok(Self {
            a,
            covariance: blocks.covariance(params),
            mu: blocks.shift(params),
            scale: 1.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// Cumulants κ₁ … κ_order.
    pub fn cumulants(&self, order: usize) -> Vec<f64> {
        let a_sigma = &self.a * &self.covariance;
        let a_mu = &self.a * &self.mu;
        let mut power = DMatrix::<f64>::identity(self.dim(), self.dim());
        let mut out = Vec::with_capacity(order);
        let mut factorial = 1.0; // (n−1)!
        for n in 1..=order {
            // power holds (AΣ)^(n−1) here.
            let shift_term = self.mu.dot(&(&power * &a_mu));
            power = &power * &a_sigma;
            let trace = power.trace();
            if n > 1 {
                factorial *= (n - 1) as f64;
            }
            let base = 2f64.powi(n as i32 - 1) * factorial * (trace + n as f64 * shift_term);
            out.push(self.scale.powi(n as i32) * base);
        }
        out
    }
}

/// Raw moments `E[Qʲ]`, `j = 1..=4`, from cumulants.
pub fn raw_moments_from_cumulants(k: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(k.len());
    if let Some(&k1) = k.first() {
        out.push(k1);
        if let Some(&k2) = k.get(1) {
            out.push(k1 * k1 + k2);
            if let Some(&k3) = k.get(2) {
                out.push(k1.powi(3) + 3.0 * k1 * k2 + k3);
                if let Some(&k4) = k.get(3) {
                    out.push(k1.powi(4) + 6.0 * k1 * k1 * k2 + 3.0 * k2 * k2 + 4.0 * k1 * k3 + k4);
                }
            }
        }
    }
    out
}

/// Mean, variance and raw moments up to `max_order` (at most 4).
pub fn quadratic_form_moments(spec: &QuadraticFormSpec, max_order: usize) -> Result<MomentSummary> {
    if !(1..=4).contains(&max_order) {
        return Err(Error::invalid(
            "max_order",
            format!("{max_order} is outside 1..=4"),
        ));
    }
    let cumulants = spec.cumulants(max_order.max(2));
    let mut raw = raw_moments_from_cumulants(&cumulants);
    raw.truncate(max_order);
    Ok(MomentSummary {
        mean: cumulants[0],
        variance: cumulants[1].max(0.0),
        raw_moments: raw,
        cumulants: cumulants[..max_order.max(2)].to_vec(),
    })
}

/// Index bookkeeping for the stacked `(X, Y)` layout `[p | k | p | k]`.
struct Blocks {
    d: usize,
    p: usize,
}

impl Blocks {
    fn new(params: &SplitChiSqParams) -> Self {
        Self {
            d: params.d(),
            p: params.p(),
        }
    }

    fn set_diag(m: &mut DMatrix<f64>, row: usize, col: usize, len: usize, v: f64) {
        for i in 0..len {
            m[(row + i, col + i)] = v;
        }
    }

    // uᵀAu = ‖u₁‖² − ‖u₁ − u₃‖² − ‖u₂ − u₄‖²
    fn forward(&self) -> DMatrix<f64> {
        let (d, p) = (self.d, self.p);
        let k = d - p;
        let mut a = DMatrix::zeros(2 * d, 2 * d);
        Self::set_diag(&mut a, 0, d, p, 1.0);
        Self::set_diag(&mut a, d, 0, p, 1.0);
        Self::set_diag(&mut a, d, d, p, -1.0);
        Self::set_diag(&mut a, p, p, k, -1.0);
        Self::set_diag(&mut a, p, d + p, k, 1.0);
        Self::set_diag(&mut a, d + p, p, k, 1.0);
        Self::set_diag(&mut a, d + p, d + p, k, -1.0);
        a
    }

    // uᵀAu = ‖u₃‖² − ‖u₁ − u₃‖² − ‖u₂ − u₄‖²
    fn swapped(&self) -> DMatrix<f64> {
        let (d, p) = (self.d, self.p);
        let k = d - p;
        let mut a = DMatrix::zeros(2 * d, 2 * d);
        Self::set_diag(&mut a, 0, 0, p, -1.0);
        Self::set_diag(&mut a, 0, d, p, 1.0);
        Self::set_diag(&mut a, d, 0, p, 1.0);
        Self::set_diag(&mut a, p, p, k, -1.0);
        Self::set_diag(&mut a, p, d + p, k, 1.0);
        Self::set_diag(&mut a, d + p, p, k, 1.0);
        Self::set_diag(&mut a, d + p, d + p, k, -1.0);
        a
    }

    fn covariance(&self, params: &SplitChiSqParams) -> DMatrix<f64> {
        let d = self.d;
        let mut diag = DVector::zeros(2 * d);
        for i in 0..d {
            diag[i] = 1.0 / params.m0();
            diag[d + i] = 1.0 / params.m1();
        }
        DMatrix::from_diagonal(&diag)
    }

    fn shift(&self, params: &SplitChiSqParams) -> DVector<f64> {
        let mut mu = DVector::zeros(2 * self.d);
        if self.p > 0 {
            let r = params.delta().sqrt();
            mu[0] = r;
            mu[self.d] = r;
        }
        mu
    }
}
