//! One-factor analysis `Σ = Ω + ΓΓᵀ` tested against the saturated covariance
//! model, for centred Gaussian data.
//!
//! The null is singular at loadings with fewer than three nonzero entries,
//! which is where classical likelihood ratio asymptotics break down and the
//! universal threshold stays valid.
//!
//! Fitting works on the profile likelihood in `t = ln ψ` (`Ω = diag ψ`):
//! for fixed `ψ` the optimal loading is the top eigenvector of
//! `Ω^{-1/2} S Ω^{-1/2}`, scaled by `√(λ − 1)`. A few EM iterations warm up
//! each start, then projected BFGS with a floor on `ψ` finishes the job.

use crate::error::{Error, Result};
use crate::rng::{derive_seed, label_tag, seeded_rng, SimRng};
use crate::slrt::{Dataset, ModelDims, SplitModel};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

/// Tuning knobs for the one-factor fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Target norm of the projected gradient of the mean profile
    /// log-likelihood with respect to `ln ψ`.
    pub tol: f64,
    /// Iteration cap per start, EM warm-up included.
    pub max_iter: usize,
    pub n_starts: usize,
    /// Lower bound on the specific variances (Heywood guard).
    pub psi_floor: f64,
    pub em_warmup: usize,
    /// Log-scale spread of the random start perturbations.
    pub perturbation: f64,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 500,
            n_starts: 5,
            psi_floor: 1e-6,
            em_warmup: 10,
            perturbation: 0.3,
            seed: 0,
        }
    }
}

impl FitOptions {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::invalid(
                "tol",
                format!("{} must be positive", self.tol),
            ));
        }
        if self.max_iter == 0 || self.n_starts == 0 {
            return Err(Error::invalid(
                "max_iter",
                "need at least one iteration and one start",
            ));
        }
        if !(self.psi_floor > 0.0) {
            return Err(Error::invalid(
                "psi_floor",
                format!("{} must be positive", self.psi_floor),
            ));
        }
        Ok(())
    }
}

/// A converged one-factor fit.
#[derive(Debug, Clone, PartialEq)]
pub struct OneFactorFit {
    /// Diagonal of `Ω`.
    pub psi: DVector<f64>,
    pub gamma: DVector<f64>,
    /// Mean log-likelihood per observation, without the `ln 2π` term.
    pub objective: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    /// Index of the start that produced the best fit.
    pub start: usize,
    /// Objective after every iteration of the winning start.
    pub trace: Vec<f64>,
}

impl OneFactorFit {
    pub fn covariance(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.psi) + &self.gamma * self.gamma.transpose()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FactorFit {
    OneFactor(OneFactorFit),
    Saturated(DMatrix<f64>),
}

impl FactorFit {
    pub fn covariance(&self) -> DMatrix<f64> {
        match self {
            FactorFit::OneFactor(f) => f.covariance(),
            FactorFit::Saturated(s) => s.clone(),
        }
    }
}

/// `(1/n) Σ xᵢxᵢᵀ` over `subset`. The data are centred by assumption.
pub fn sample_second_moment(data: &Dataset, subset: &[usize]) -> DMatrix<f64> {
    let q = data.dim();
    let mut s = DMatrix::zeros(q, q);
    for &i in subset {
        let x = data.row(i);
        for a in 0..q {
            let xa = x[a];
            for b in a..q {
                s[(a, b)] += xa * x[b];
            }
        }
    }
    let n = subset.len() as f64;
    for a in 0..q {
        for b in a..q {
            let v = s[(a, b)] / n;
            s[(a, b)] = v;
            s[(b, a)] = v;
        }
    }
    s
}

/// `−½[ln|Σ| + tr(Σ⁻¹S)]`, or an error when `Σ` is not positive definite.
fn mean_log_likelihood(sigma: &DMatrix<f64>, s: &DMatrix<f64>) -> Result<f64> {
    let chol = sigma
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("covariance is not positive definite".into()))?;
    let logdet: f64 = 2.0
        * chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|v| v.ln())
            .sum::<f64>();
    let trace = chol.solve(s).trace();
    Ok(-0.5 * (logdet + trace))
}

/// Reject sample covariances that cannot serve as a plug-in estimate.
fn check_nonsingular(s: &DMatrix<f64>) -> Result<()> {
    let eig = s.clone().symmetric_eigenvalues();
    let max = eig.max();
    let min = eig.min();
    if !(min > 1e-12 * max) {
        return Err(Error::Numerical(format!(
            "near-singular sample covariance (eigenvalues {min:e} to {max:e})"
        )));
    }
    Ok(())
}

/// Top eigenpair of a symmetric matrix. Power iteration from `warm` is tried
/// first since factor data usually have a wide spectral gap.
fn top_eigenpair(w: &DMatrix<f64>, warm: &DVector<f64>) -> (f64, DVector<f64>) {
    let mut v = warm.normalize();
    for _ in 0..60 {
        let wv = w * &v;
        let next_lambda = v.dot(&wv);
        let norm = wv.norm();
        if !(norm > 0.0) {
            break;
        }
        let next = wv / norm;
        let residual = (w * &next - &next * next_lambda).norm();
        v = next;
        if residual <= 1e-13 * norm {
            return (v.dot(&(w * &v)), v);
        }
    }
    let eig = SymmetricEigen::new(w.clone());
    let (idx, &lambda) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty matrix");
    (lambda, eig.eigenvectors.column(idx).into_owned())
}

/// Profile likelihood at `t = ln ψ`.
struct Profile {
    t: DVector<f64>,
    value: f64,
    /// Ascent gradient with respect to `t`.
    grad_t: DVector<f64>,
    gamma: DVector<f64>,
    eigvec: DVector<f64>,
}

impl Profile {
    fn new(s: &DMatrix<f64>, t: DVector<f64>, warm: &DVector<f64>) -> Self {
        let q = t.len();
        let psi = t.map(f64::exp);
        let r = psi.map(|v| 1.0 / v.sqrt());
        let w = DMatrix::from_fn(q, q, |a, b| s[(a, b)] * r[a] * r[b]);
        let (lambda, v) = top_eigenpair(&w, warm);
        let excess = (lambda - 1.0).max(0.0);
        let gamma = DVector::from_fn(q, |i, _| psi[i].sqrt() * v[i] * excess.sqrt());
        // The closed form −½[Σt + ln λ − λ + 1 + tr W] loses about eight
        // digits once some ψ sits near the floor, so evaluate through a
        // Cholesky factor of Σ instead.
        let sigma = DMatrix::from_diagonal(&psi) + &gamma * gamma.transpose();
        let Some(chol) = sigma.cholesky() else {
            return Self {
                t,
                value: f64::NEG_INFINITY,
                grad_t: DVector::zeros(q),
                gamma,
                eigvec: v,
            };
        };
        let logdet: f64 = 2.0
            * chol
                .l_dirty()
                .diagonal()
                .iter()
                .map(|d| d.ln())
                .sum::<f64>();
        let value = -0.5 * (logdet + chol.solve(s).trace());
        let sigma_inv = chol.inverse();
        let m = &sigma_inv * s * &sigma_inv - &sigma_inv;
        let grad_t = DVector::from_fn(q, |i, _| 0.5 * m[(i, i)] * psi[i]);
        Self {
            t,
            value,
            grad_t,
            gamma,
            eigvec: v,
        }
    }

    /// Coordinates held at the floor because the gradient pushes them down.
    fn active(&self, lb: f64) -> Vec<bool> {
        self.t
            .iter()
            .zip(self.grad_t.iter())
            .map(|(&ti, &gi)| ti <= lb + 1e-12 && gi < 0.0)
            .collect()
    }

    /// The loading is optimal by construction, so only `t` contributes.
    /// Gradients in `ψ` itself are useless near the floor, where rounding in
    /// `S − Σ` gets amplified by `1/ψ²`.
    fn projected_gradient_norm(&self, active: &[bool]) -> f64 {
        self.grad_t
            .iter()
            .zip(active)
            .filter(|(_, &a)| !a)
            .map(|(g, _)| g * g)
            .sum::<f64>()
            .sqrt()
    }

    fn psi(&self) -> DVector<f64> {
        self.t.map(f64::exp)
    }
}

/// One EM update of `(Γ, ψ)`; never decreases the likelihood.
fn em_step(
    s: &DMatrix<f64>,
    gamma: &DVector<f64>,
    psi: &DVector<f64>,
    floor: f64,
) -> (DVector<f64>, DVector<f64>) {
    let sigma = DMatrix::from_diagonal(psi) + gamma * gamma.transpose();
    let b = match sigma.cholesky() {
        Some(c) => c.solve(gamma),
        None => return (gamma.clone(), psi.clone()),
    };
    let cxz = s * &b;
    let czz = 1.0 - b.dot(gamma) + b.dot(&cxz);
    let new_gamma = &cxz / czz;
    let new_psi = DVector::from_fn(psi.len(), |i, _| {
        (s[(i, i)] - new_gamma[i] * cxz[i]).max(floor)
    });
    (new_gamma, new_psi)
}

fn em_objective(s: &DMatrix<f64>, gamma: &DVector<f64>, psi: &DVector<f64>) -> f64 {
    let sigma = DMatrix::from_diagonal(psi) + gamma * gamma.transpose();
    mean_log_likelihood(&sigma, s).unwrap_or(f64::NEG_INFINITY)
}

struct StartOutcome {
    fit: OneFactorFit,
    converged: bool,
}

fn fit_from_start(
    s: &DMatrix<f64>,
    mut gamma: DVector<f64>,
    mut psi: DVector<f64>,
    opts: &FitOptions,
    start: usize,
) -> StartOutcome {
    let q = psi.len();
    let lb = opts.psi_floor.ln();
    let mut trace = Vec::with_capacity(opts.max_iter + 1);
    let mut iterations = 0;

    trace.push(em_objective(s, &gamma, &psi));
    for _ in 0..opts.em_warmup.min(opts.max_iter) {
        let (g, p) = em_step(s, &gamma, &psi, opts.psi_floor);
        let value = em_objective(s, &g, &p);
        if value < *trace.last().expect("trace is seeded") {
            break;
        }
        gamma = g;
        psi = p;
        trace.push(value);
        iterations += 1;
    }

    let warm = if gamma.norm() > 0.0 {
        gamma.component_div(&psi.map(f64::sqrt))
    } else {
        DVector::from_element(q, 1.0)
    };
    let mut cur = Profile::new(s, psi.map(|v| v.max(opts.psi_floor).ln()), &warm);
    trace.push(cur.value);

    let mut h = DMatrix::<f64>::identity(q, q);
    let mut fresh = true;
    let mut prev_active = cur.active(lb);
    let mut converged = false;
    while iterations < opts.max_iter {
        let active = cur.active(lb);
        if cur.projected_gradient_norm(&active) <= opts.tol {
            converged = true;
            break;
        }
        if active != prev_active {
            h = DMatrix::identity(q, q);
            fresh = true;
        }
        prev_active = active.clone();
        let g_free = DVector::from_fn(q, |i, _| if active[i] { 0.0 } else { cur.grad_t[i] });
        let mut dir = &h * &g_free;
        for (i, &a) in active.iter().enumerate() {
            if a {
                dir[i] = 0.0;
            }
        }
        if dir.dot(&g_free) <= 0.0 {
            h = DMatrix::identity(q, q);
            fresh = true;
            dir = g_free.clone();
        }

        // Keep any single log-step below e^4 to stay in floating range.
        let mut step = (4.0 / dir.amax()).min(1.0);
        let mut accepted = None;
        for _ in 0..60 {
            let trial = DVector::from_fn(q, |i, _| (cur.t[i] + step * dir[i]).max(lb));
            let moved = &trial - &cur.t;
            let next = Profile::new(s, trial, &cur.eigvec);
            if next.value.is_finite()
                && next.value >= cur.value + 1e-4 * g_free.dot(&moved)
                && next.value >= cur.value
            {
                accepted = Some((next, moved));
                break;
            }
            step *= 0.5;
        }
        iterations += 1;
        let Some((next, sk)) = accepted else {
            if fresh {
                break;
            }
            h = DMatrix::identity(q, q);
            fresh = true;
            continue;
        };
        // Curvature pair for the minimization of −objective.
        let yk = &cur.grad_t - &next.grad_t;
        let sy = sk.dot(&yk);
        if sy > 1e-12 * sk.norm() * yk.norm() {
            if fresh {
                h *= sy / yk.dot(&yk);
                fresh = false;
            }
            let rho = 1.0 / sy;
            let hy = &h * &yk;
            let yhy = yk.dot(&hy);
            // H ← (I − ρsyᵀ)H(I − ρysᵀ) + ρssᵀ, expanded.
            h += (&sk * sk.transpose()) * (rho * rho * yhy + rho)
                - (&hy * sk.transpose() + &sk * hy.transpose()) * rho;
        }
        cur = next;
        trace.push(cur.value);
    }

    let active = cur.active(lb);
    let fit = OneFactorFit {
        psi: cur.psi(),
        gamma: cur.gamma.clone(),
        objective: cur.value,
        gradient_norm: cur.projected_gradient_norm(&active),
        iterations,
        start,
        trace,
    };
    StartOutcome { fit, converged }
}

/// Principal-eigenvector start with optional log-normal perturbation.
fn initial_point<R: Rng + ?Sized>(
    s: &DMatrix<f64>,
    opts: &FitOptions,
    rng: Option<&mut R>,
) -> (DVector<f64>, DVector<f64>) {
    let q = s.nrows();
    let (lambda, v) = top_eigenpair(s, &DVector::from_element(q, 1.0));
    let mut gamma = v * lambda.max(0.0).sqrt();
    let mut psi = DVector::from_fn(q, |i, _| {
        (s[(i, i)] - gamma[i] * gamma[i])
            .max(0.05 * s[(i, i)])
            .max(opts.psi_floor)
    });
    if let Some(rng) = rng {
        for i in 0..q {
            gamma[i] *= 1.0 + opts.perturbation * rng.sample::<f64, _>(StandardNormal);
            psi[i] = (psi[i] * (opts.perturbation * rng.sample::<f64, _>(StandardNormal)).exp())
                .max(opts.psi_floor);
        }
    }
    (gamma, psi)
}

/// One-factor maximum likelihood fit to the second-moment matrix `s`.
///
/// All starts run to completion and the best converged one is returned.
pub fn fit_one_factor(s: &DMatrix<f64>, opts: &FitOptions) -> Result<OneFactorFit> {
    opts.validate()?;
    if !s.is_square() || s.nrows() == 0 {
        return Err(Error::DimensionMismatch(
            "second-moment matrix must be square".into(),
        ));
    }
    let mut rng = seeded_rng(derive_seed(opts.seed, label_tag("factor-starts")));
    let mut best: Option<OneFactorFit> = None;
    let mut worst_gradient: f64 = 0.0;
    for start in 0..opts.n_starts {
        let (gamma, psi) = if start == 0 {
            initial_point(s, opts, None::<&mut SimRng>)
        } else {
            initial_point(s, opts, Some(&mut rng))
        };
        let outcome = fit_from_start(s, gamma, psi, opts, start);
        if !outcome.converged {
            worst_gradient = worst_gradient.max(outcome.fit.gradient_norm);
            continue;
        }
        if best
            .as_ref()
            .is_none_or(|b| outcome.fit.objective > b.objective)
        {
            best = Some(outcome.fit);
        }
    }
    best.ok_or_else(|| {
        Error::NonConvergence(format!(
            "one-factor fit did not reach gradient norm {} in {} iterations from any of {} starts (last gradient {worst_gradient:e})",
            opts.tol, opts.max_iter, opts.n_starts
        ))
    })
}

/// One-factor or saturated fit on `subset`.
pub fn factor_mle(
    data: &Dataset,
    subset: &[usize],
    restrict_to_one_factor: bool,
    opts: &FitOptions,
) -> Result<FactorFit> {
    if subset.len() <= data.dim() {
        let q = data.dim();
        return Err(Error::invalid(
            "subset",
            format!(
                "{} observations cannot identify a {q}x{q} covariance",
                subset.len()
            ),
        ));
    }
    let s = sample_second_moment(data, subset);
    if restrict_to_one_factor {
        Ok(FactorFit::OneFactor(fit_one_factor(&s, opts)?))
    } else {
        check_nonsingular(&s)?;
        Ok(FactorFit::Saturated(s))
    }
}

/// One-factor null against the saturated model for `n_vars` centred
/// Gaussian variables. Parameters are covariance matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    n_vars: usize,
    options: FitOptions,
}

impl FactorModel {
    pub fn new(n_vars: usize) -> Result<Self> {
        Self::with_options(n_vars, FitOptions::default())
    }

    pub fn with_options(n_vars: usize, options: FitOptions) -> Result<Self> {
        if n_vars < 2 {
            return Err(Error::invalid(
                "n_vars",
                format!("need at least two variables, got {n_vars}"),
            ));
        }
        options.validate()?;
        Ok(Self { n_vars, options })
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn options(&self) -> &FitOptions {
        &self.options
    }

    fn check_data(&self, data: &Dataset) -> Result<()> {
        if data.dim() != self.n_vars {
            return Err(Error::DimensionMismatch(format!(
                "model has {} variables, data have {}",
                self.n_vars,
                data.dim()
            )));
        }
        Ok(())
    }
}

impl SplitModel for FactorModel {
    type Param = DMatrix<f64>;

    fn dims(&self) -> ModelDims {
        ModelDims {
            d: self.n_vars * (self.n_vars + 1) / 2,
            k: 2 * self.n_vars,
        }
    }

    fn log_likelihood(
        &self,
        sigma: &DMatrix<f64>,
        data: &Dataset,
        subset: &[usize],
    ) -> Result<f64> {
        self.check_data(data)?;
        if sigma.nrows() != self.n_vars || sigma.ncols() != self.n_vars {
            return Err(Error::DimensionMismatch(
                "covariance has the wrong shape".into(),
            ));
        }
        let s = sample_second_moment(data, subset);
        let n = subset.len() as f64;
        Ok(n * (mean_log_likelihood(sigma, &s)? - 0.5 * self.n_vars as f64 * (2.0 * PI).ln()))
    }

    fn mle_null(&self, data: &Dataset, subset: &[usize]) -> Result<DMatrix<f64>> {
        self.check_data(data)?;
        Ok(factor_mle(data, subset, true, &self.options)?.covariance())
    }

    fn mle_full(&self, data: &Dataset, subset: &[usize]) -> Result<DMatrix<f64>> {
        self.check_data(data)?;
        Ok(factor_mle(data, subset, false, &self.options)?.covariance())
    }

    fn simulate<R: Rng + ?Sized>(&self, sigma: &DMatrix<f64>, n: usize, rng: &mut R) -> Dataset {
        simulate_gaussian(sigma, n, rng)
    }
}

fn simulate_gaussian<R: Rng + ?Sized>(sigma: &DMatrix<f64>, n: usize, rng: &mut R) -> Dataset {
    let q = sigma.nrows();
    let l = sigma
        .clone()
        .cholesky()
        .expect("simulation covariance must be positive definite")
        .unpack();
    let mut values = Vec::with_capacity(n * q);
    let mut z = vec![0.0; q];
    for _ in 0..n {
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        for a in 0..q {
            values.push((0..=a).map(|b| l[(a, b)] * z[b]).sum());
        }
    }
    Dataset::new(q, values).expect("rows have length q")
}

/// Two-factor data-generating process `Ω + ΓΓᵀ + Γ₂Γ₂ᵀ` with the second
/// loading spread evenly, `Γ₂ = (h/√q, …, h/√q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoFactorAlternative {
    pub omega: DVector<f64>,
    pub gamma: DVector<f64>,
    pub gamma2: DVector<f64>,
    pub h: f64,
}

impl TwoFactorAlternative {
    pub fn n_vars(&self) -> usize {
        self.omega.len()
    }

    /// `Ω + ΓΓᵀ`, the one-factor part.
    pub fn null_covariance(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.omega) + &self.gamma * self.gamma.transpose()
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        self.null_covariance() + &self.gamma2 * self.gamma2.transpose()
    }

    /// Number of nonzero entries in the first loading; below three the null
    /// model is singular at the truth.
    pub fn loading_support(&self) -> usize {
        self.gamma.iter().filter(|&&g| g != 0.0).count()
    }

    pub fn simulate<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Dataset {
        simulate_gaussian(&self.covariance(), n, rng)
    }
}

/// Twelve variables with `Ω = I/5` and `Γ = (5,5,5,0,…)` when `regular`,
/// `Γ = (5,5,0,…)` otherwise.
pub fn factor_scenario(regular: bool, h: f64) -> Result<TwoFactorAlternative> {
    const Q: usize = 12;
    if !(h >= 0.0 && h.is_finite()) {
        return Err(Error::invalid(
            "h",
            format!("{h} must be finite and nonnegative"),
        ));
    }
    let support = if regular { 3 } else { 2 };
    Ok(TwoFactorAlternative {
        omega: DVector::from_element(Q, 0.2),
        gamma: DVector::from_fn(Q, |i, _| if i < support { 5.0 } else { 0.0 }),
        gamma2: DVector::from_element(Q, h / (Q as f64).sqrt()),
        h,
    })
}
