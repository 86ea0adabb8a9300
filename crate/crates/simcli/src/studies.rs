//! The simulation studies.
//!
//! Power studies return [`PowerGroup`]s: all methods of a group are
//! evaluated on the same replications, so paired differences between them
//! have common-random-number standard errors.

use crate::error::{config, SimError, SimResult};
use crate::harness::{replicate, row_seed, summarize, Decisions, Outcome};
use crate::output::{fmt_opt_real, fmt_real, CsvRecord};
use rand::seq::SliceRandom;
use rand::Rng;
use splitlrt::models::{factor_scenario, FactorModel, FitOptions, GaussianMeanModel};
use splitlrt::ratio::{
    confidence_radius_split, mc_best_split, normal_best_split, optimal_split, optimal_split_normal,
    rule_of_thumb_split, SplitMethod, SplitSearchConfig,
};
use splitlrt::slrt::{
    classical_lrt, crossfit_result, split_lambda, split_sizes, split_with_rng, subsample_result,
    DataSplit, Dataset, SplitModel,
};
use splitlrt::splitchisq::{
    even_crossfit_moments, mc_quantile, order_statistic_quantile, quadratic_form_moments,
    split_moments, LimitBank, LimitVariant, QuadraticFormSpec, SplitChiSqParams,
};
use splitlrt::universal_threshold;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

/// Smallest replication count any study accepts.
pub const MIN_REPS: usize = 100;

/// Default replication count for studies that simulate data.
pub const DATA_REPS: usize = 10_000;

/// Default replication count for studies that sample limit laws.
pub const LIMIT_REPS: usize = 100_000;

fn check_reps(n_reps: usize) -> SimResult<()> {
    if n_reps < MIN_REPS {
        return Err(config(format!(
            "n_reps = {n_reps} is below the minimum of {MIN_REPS}"
        )));
    }
    Ok(())
}

fn check_grid<T>(name: &str, grid: &[T]) -> SimResult<()> {
    if grid.is_empty() {
        return Err(config(format!("{name} grid is empty")));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> SimResult<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(config(format!("alpha = {alpha} is outside (0, 1)")));
    }
    Ok(())
}

/// `start, start + step, …` up to `end` inclusive, rounded to 1e-12.
pub fn linear_grid(start: f64, end: f64, step: f64) -> Vec<f64> {
    let count = ((end - start) / step + 1e-9).floor() as usize;
    (0..=count)
        .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
        .collect()
}

fn random_order<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order
}

/// Turn a numerical failure into a missing outcome and keep other errors.
fn tolerate<T>(result: splitlrt::Result<T>) -> SimResult<Option<T>> {
    match result {
        Ok(v) => Ok(Some(v)),
        Err(e) if e.is_numerical() => Ok(None),
        Err(e) => Err(SimError::Core(e)),
    }
}

// ---------------------------------------------------------------------------
// Power tables

/// One column of a [`PowerGroup`].
#[derive(Debug, Clone, PartialEq)]
pub struct MethodLabel {
    pub name: String,
    pub m0: Option<f64>,
    /// Value of the group's free variable for this method's row.
    pub value: f64,
}

impl MethodLabel {
    fn key(&self) -> String {
        match self.m0 {
            Some(m0) => format!("{}@{m0}", self.name),
            None => self.name.clone(),
        }
    }
}

/// Methods evaluated on common replications.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerGroup {
    pub scenario: String,
    pub variable: &'static str,
    pub seed: u64,
    pub delta: Option<f64>,
    pub labels: Vec<MethodLabel>,
    pub decisions: Decisions,
}

impl PowerGroup {
    /// Column index of `name` at splitting ratio `m0`.
    pub fn find(&self, name: &str, m0: Option<f64>) -> Option<usize> {
        self.labels
            .iter()
            .position(|l| l.name == name && l.m0.map(f64::to_bits) == m0.map(f64::to_bits))
    }

    pub fn rows(&self) -> Vec<PowerRow> {
        self.labels
            .iter()
            .zip(&self.decisions.outcomes)
            .map(|(label, outcomes)| {
                let s = summarize(outcomes);
                PowerRow {
                    scenario: self.scenario.clone(),
                    variable: self.variable.to_string(),
                    value: label.value,
                    method: label.name.clone(),
                    power: s.power,
                    se: s.std_error,
                    reps: s.reps,
                    seed: self.seed,
                    m0: label.m0,
                    delta: self.delta,
                    failures: s.failures,
                }
            })
            .collect()
    }
}

pub fn power_rows(groups: &[PowerGroup]) -> Vec<PowerRow> {
    groups.iter().flat_map(PowerGroup::rows).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerRow {
    pub scenario: String,
    pub variable: String,
    pub value: f64,
    pub method: String,
    pub power: f64,
    pub se: f64,
    /// Replications with a usable statistic.
    pub reps: usize,
    pub seed: u64,
    pub m0: Option<f64>,
    pub delta: Option<f64>,
    pub failures: usize,
}

impl CsvRecord for PowerRow {
    fn header() -> &'static [&'static str] {
        &[
            "scenario", "variable", "value", "method", "power", "se", "reps", "seed", "m0",
            "delta", "failures",
        ]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.scenario.clone(),
            self.variable.clone(),
            fmt_real(self.value),
            self.method.clone(),
            fmt_real(self.power),
            fmt_real(self.se),
            self.reps.to_string(),
            self.seed.to_string(),
            fmt_opt_real(self.m0),
            fmt_opt_real(self.delta),
            self.failures.to_string(),
        ]
    }
}

fn group_from_columns(
    scenario: String,
    variable: &'static str,
    seed: u64,
    delta: Option<f64>,
    labels: Vec<MethodLabel>,
    outcomes: Vec<Vec<Outcome>>,
) -> PowerGroup {
    let methods = labels.iter().map(MethodLabel::key).collect();
    PowerGroup {
        scenario,
        variable,
        seed,
        delta,
        labels,
        decisions: Decisions { methods, outcomes },
    }
}

// ---------------------------------------------------------------------------
// Null quantiles

#[derive(Debug, Clone, PartialEq)]
pub struct QuantileStudy {
    pub d: usize,
    pub p_list: Vec<usize>,
    pub m0_grid: Vec<f64>,
    pub alpha_list: Vec<f64>,
    pub n_reps: usize,
    pub seed: u64,
}

impl Default for QuantileStudy {
    fn default() -> Self {
        Self {
            d: 6,
            p_list: vec![1, 3, 6],
            m0_grid: linear_grid(0.1, 0.9, 0.1),
            alpha_list: vec![0.01, 0.05, 0.1],
            n_reps: LIMIT_REPS,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantileRow {
    pub d: usize,
    pub p: usize,
    pub m0: f64,
    pub alpha: f64,
    /// `(1 − α)` quantile of the null split chi-square law.
    pub quantile: f64,
    pub threshold: f64,
    pub reps: usize,
    pub seed: u64,
}

impl QuantileRow {
    /// How much the universal threshold overshoots the limit quantile.
    pub fn gap(&self) -> f64 {
        self.threshold - self.quantile
    }
}

impl CsvRecord for QuantileRow {
    fn header() -> &'static [&'static str] {
        &[
            "scenario",
            "d",
            "p",
            "m0",
            "alpha",
            "quantile",
            "threshold",
            "gap",
            "reps",
            "seed",
        ]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            "quantile".into(),
            self.d.to_string(),
            self.p.to_string(),
            fmt_real(self.m0),
            fmt_real(self.alpha),
            fmt_real(self.quantile),
            fmt_real(self.threshold),
            fmt_real(self.gap()),
            self.reps.to_string(),
            self.seed.to_string(),
        ]
    }
}

/// Monte Carlo `(1 − α)` quantiles of the null limit next to `−2 ln α`.
pub fn run_quantile_study(cfg: &QuantileStudy) -> SimResult<Vec<QuantileRow>> {
    check_reps(cfg.n_reps)?;
    check_grid("p", &cfg.p_list)?;
    check_grid("m0", &cfg.m0_grid)?;
    check_grid("alpha", &cfg.alpha_list)?;
    for &alpha in &cfg.alpha_list {
        check_alpha(alpha)?;
    }
    let mut rows = Vec::new();
    for &p in &cfg.p_list {
        let seed = row_seed(cfg.seed, "quantile", &format!("d={},p={p}", cfg.d));
        let bank = LimitBank::generate(cfg.d, p, cfg.n_reps, seed)?;
        for &m0 in &cfg.m0_grid {
            let draws = bank.draws(m0, 0.0, LimitVariant::Split)?;
            for &alpha in &cfg.alpha_list {
                rows.push(QuantileRow {
                    d: cfg.d,
                    p,
                    m0,
                    alpha,
                    quantile: order_statistic_quantile(&draws, 1.0 - alpha)?,
                    threshold: universal_threshold(alpha),
                    reps: cfg.n_reps,
                    seed,
                });
            }
        }
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Gaussian power against sample size

#[derive(Debug, Clone, PartialEq)]
pub struct PowerVsN {
    pub d: usize,
    pub k: usize,
    /// Every mean coordinate equals `theta`.
    pub theta: f64,
    pub n_grid: Vec<usize>,
    pub m0_list: Vec<f64>,
    pub alpha: f64,
    pub n_reps: usize,
    /// Draws used for the asymptotic critical values.
    pub limit_reps: usize,
    pub seed: u64,
}

impl Default for PowerVsN {
    fn default() -> Self {
        Self {
            d: 6,
            k: 0,
            theta: 0.1,
            n_grid: vec![50, 100, 200, 500, 1000, 2000],
            m0_list: vec![0.5],
            alpha: 0.05,
            n_reps: DATA_REPS,
            limit_reps: LIMIT_REPS,
            seed: 1,
        }
    }
}

pub const GAUSSIAN_SCENARIO: &str = "gaussian";

/// Classical LRT against the SLRT with universal and asymptotic critical
/// values, for `N_d((θ,…,θ), I)` data.
pub fn run_power_vs_n(cfg: &PowerVsN) -> SimResult<Vec<PowerGroup>> {
    check_reps(cfg.n_reps)?;
    check_reps(cfg.limit_reps)?;
    check_alpha(cfg.alpha)?;
    check_grid("n", &cfg.n_grid)?;
    check_grid("m0", &cfg.m0_list)?;
    let model = GaussianMeanModel::new(cfg.d, cfg.k)?;
    let p = model.p();
    if p == 0 {
        return Err(config("the null must constrain at least one coordinate"));
    }
    for &n in &cfg.n_grid {
        for &m0 in &cfg.m0_list {
            split_sizes(n, m0)?;
        }
    }
    let threshold = universal_threshold(cfg.alpha);
    let asym: Vec<f64> = cfg
        .m0_list
        .iter()
        .map(|&m0| {
            let params = SplitChiSqParams::central(cfg.d, p, m0)?;
            let seed = row_seed(
                cfg.seed,
                GAUSSIAN_SCENARIO,
                &format!("asymptotic-quantile,m0={m0}"),
            );
            mc_quantile(
                &params,
                LimitVariant::Split,
                1.0 - cfg.alpha,
                cfg.limit_reps,
                seed,
            )
        })
        .collect::<splitlrt::Result<_>>()?;
    let theta = vec![cfg.theta; cfg.d];

    let mut groups = Vec::new();
    for &n in &cfg.n_grid {
        let value = n as f64;
        let mut labels = vec![MethodLabel {
            name: "lrt".into(),
            m0: None,
            value,
        }];
        for &m0 in &cfg.m0_list {
            for name in ["slrt-universal", "slrt-asymptotic"] {
                labels.push(MethodLabel {
                    name: name.into(),
                    m0: Some(m0),
                    value,
                });
            }
        }
        let seed = row_seed(cfg.seed, GAUSSIAN_SCENARIO, &format!("n={n}"));
        let methods = labels.iter().map(MethodLabel::key).collect();
        let decisions = replicate(cfg.n_reps, seed, methods, |rng| {
            let data = model.simulate(&theta, n, rng);
            let order = random_order(n, rng);
            let mut out = Vec::with_capacity(1 + 2 * cfg.m0_list.len());
            out.push(Some(classical_lrt(&model, &data, cfg.alpha)?.reject));
            for (&m0, &q) in cfg.m0_list.iter().zip(&asym) {
                let split = DataSplit::from_order(&order, m0)?;
                let lambda = split_lambda(&model, &data, split.d0(), split.d1())?;
                out.push(Some(lambda > threshold));
                out.push(Some(lambda > q));
            }
            Ok(out)
        })?;
        groups.push(PowerGroup {
            scenario: format!(
                "{GAUSSIAN_SCENARIO}:d={},k={},theta={}",
                cfg.d, cfg.k, cfg.theta
            ),
            variable: "n",
            seed,
            delta: None,
            labels,
            decisions,
        });
    }
    Ok(groups)
}

// ---------------------------------------------------------------------------
// Limit power against splitting ratio

#[derive(Debug, Clone, PartialEq)]
pub struct PowerVsSplit {
    pub d: usize,
    pub p_list: Vec<usize>,
    pub delta: f64,
    pub alpha: f64,
    pub m0_grid: Vec<f64>,
    pub n_reps: usize,
    pub seed: u64,
}

impl Default for PowerVsSplit {
    fn default() -> Self {
        Self {
            d: 6,
            p_list: vec![1, 3, 6],
            delta: 40.0,
            alpha: 0.05,
            m0_grid: linear_grid(0.05, 0.95, 0.05),
            n_reps: LIMIT_REPS,
            seed: 1,
        }
    }
}

/// Power of the universal threshold under the split chi-square limit, one
/// group per `p` with the `m0` grid as columns on common draws.
pub fn run_power_vs_split(cfg: &PowerVsSplit) -> SimResult<Vec<PowerGroup>> {
    check_reps(cfg.n_reps)?;
    check_alpha(cfg.alpha)?;
    check_grid("p", &cfg.p_list)?;
    check_grid("m0", &cfg.m0_grid)?;
    let threshold = universal_threshold(cfg.alpha);
    let mut groups = Vec::new();
    for &p in &cfg.p_list {
        let scenario = format!("power-vs-split:d={},p={p}", cfg.d);
        let seed = row_seed(cfg.seed, &scenario, "bank");
        let bank = LimitBank::generate(cfg.d, p, cfg.n_reps, seed)?;
        let mut labels = Vec::new();
        let mut outcomes = Vec::new();
        for &m0 in &cfg.m0_grid {
            let hits = bank.exceedances(m0, cfg.delta, LimitVariant::Split, threshold)?;
            outcomes.push(hits.into_iter().map(Some).collect());
            labels.push(MethodLabel {
                name: "slrt-universal".into(),
                m0: Some(m0),
                value: m0,
            });
        }
        groups.push(group_from_columns(
            scenario,
            "m0",
            seed,
            Some(cfg.delta),
            labels,
            outcomes,
        ));
    }
    Ok(groups)
}

// ---------------------------------------------------------------------------
// Splitting-ratio rules compared across dimensions

/// How the null dimension `k` follows `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KRule {
    Fixed(usize),
    /// `k = d / c`, rounded down.
    Fraction(usize),
}

impl KRule {
    pub fn k(&self, d: usize) -> usize {
        match *self {
            KRule::Fixed(k) => k,
            KRule::Fraction(c) => d / c,
        }
    }
}

impl fmt::Display for KRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KRule::Fixed(k) => write!(f, "{k}"),
            KRule::Fraction(c) => write!(f, "d/{c}"),
        }
    }
}

impl FromStr for KRule {
    type Err = SimError;

    fn from_str(s: &str) -> SimResult<Self> {
        let bad = || {
            config(format!(
                "k rule '{s}' is neither an integer nor 'd/<integer>'"
            ))
        };
        match s.strip_prefix("d/") {
            Some(c) => {
                let c: usize = c.parse().map_err(|_| bad())?;
                if c == 0 {
                    return Err(bad());
                }
                Ok(KRule::Fraction(c))
            }
            None => Ok(KRule::Fixed(s.parse().map_err(|_| bad())?)),
        }
    }
}

/// How the noncentrality follows `d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaRule {
    Fixed(f64),
    /// Smallest `δ` at which the normal-approximation optimal split reaches
    /// the given power.
    Calibrated(f64),
}

impl fmt::Display for DeltaRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeltaRule::Fixed(d) => write!(f, "fixed:{d}"),
            DeltaRule::Calibrated(t) => write!(f, "target:{t}"),
        }
    }
}

impl FromStr for DeltaRule {
    type Err = SimError;

    fn from_str(s: &str) -> SimResult<Self> {
        let bad = || {
            config(format!(
                "delta rule '{s}' must be 'fixed:<delta>' or 'target:<power>'"
            ))
        };
        let (kind, v) = s.split_once(':').ok_or_else(bad)?;
        let v: f64 = v.parse().map_err(|_| bad())?;
        match kind {
            "fixed" if v >= 0.0 => Ok(DeltaRule::Fixed(v)),
            "target" if v > 0.0 && v < 1.0 => Ok(DeltaRule::Calibrated(v)),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitComparison {
    pub d_grid: Vec<usize>,
    pub k_rule: KRule,
    pub delta_rule: DeltaRule,
    pub alpha: f64,
    pub n_reps: usize,
    pub seed: u64,
}

impl Default for SplitComparison {
    fn default() -> Self {
        Self {
            d_grid: vec![6, 12, 24, 48, 96],
            k_rule: KRule::Fixed(5),
            delta_rule: DeltaRule::Fixed(100.0),
            alpha: 0.05,
            n_reps: LIMIT_REPS,
            seed: 1,
        }
    }
}

/// Method names used by the split comparison, in column order.
pub const SPLIT_RULES: [SplitMethod; 4] = [
    SplitMethod::NormalApprox,
    SplitMethod::MonteCarlo,
    SplitMethod::RadiusMinimizing,
    SplitMethod::RuleOfThumb,
];

/// Limit power of each splitting rule. The Monte Carlo search and the power
/// evaluation use independent draws so the search cannot overfit.
pub fn run_split_comparison(cfg: &SplitComparison) -> SimResult<Vec<PowerGroup>> {
    check_reps(cfg.n_reps)?;
    check_alpha(cfg.alpha)?;
    check_grid("d", &cfg.d_grid)?;
    let threshold = universal_threshold(cfg.alpha);
    let scenario = format!("split-comparison:k={},{}", cfg.k_rule, cfg.delta_rule);
    let mut groups = Vec::new();
    for &d in &cfg.d_grid {
        let k = cfg.k_rule.k(d);
        if k >= d {
            return Err(config(format!(
                "k = {k} leaves no tested coordinates at d = {d}"
            )));
        }
        let p = d - k;
        let search = SplitSearchConfig {
            alpha: cfg.alpha,
            n_reps: cfg.n_reps,
            seed: row_seed(cfg.seed, &scenario, &format!("search,d={d}")),
            target_power: match cfg.delta_rule {
                DeltaRule::Calibrated(t) => t,
                DeltaRule::Fixed(_) => SplitSearchConfig::default().target_power,
            },
            ..SplitSearchConfig::default()
        };
        let delta = match cfg.delta_rule {
            DeltaRule::Fixed(delta) => delta,
            DeltaRule::Calibrated(_) => optimal_split_normal(d, p, &search)?.delta_used,
        };
        let search_bank = LimitBank::generate(d, p, cfg.n_reps, search.seed)?;
        let splits = [
            normal_best_split(d, p, delta, &search)?.0,
            mc_best_split(&search_bank, delta, LimitVariant::Split, &search)?.0,
            confidence_radius_split(d, cfg.alpha)?,
            rule_of_thumb_split(d, k)?,
        ];
        let seed = row_seed(cfg.seed, &scenario, &format!("evaluate,d={d}"));
        let bank = LimitBank::generate(d, p, cfg.n_reps, seed)?;
        let mut labels = Vec::new();
        let mut outcomes = Vec::new();
        for (method, &m0) in SPLIT_RULES.iter().zip(&splits) {
            let hits = bank.exceedances(m0, delta, LimitVariant::Split, threshold)?;
            outcomes.push(hits.into_iter().map(Some).collect());
            labels.push(MethodLabel {
                name: method.as_str().into(),
                m0: Some(m0),
                value: d as f64,
            });
        }
        groups.push(group_from_columns(
            scenario.clone(),
            "d",
            seed,
            Some(delta),
            labels,
            outcomes,
        ));
    }
    Ok(groups)
}

// ---------------------------------------------------------------------------
// One-factor analysis

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorScenario {
    Regular,
    Irregular,
}

impl FactorScenario {
    pub const ALL: [FactorScenario; 2] = [FactorScenario::Regular, FactorScenario::Irregular];

    pub fn name(&self) -> &'static str {
        match self {
            FactorScenario::Regular => "factor-regular",
            FactorScenario::Irregular => "factor-irregular",
        }
    }
}

impl FromStr for FactorScenario {
    type Err = SimError;

    fn from_str(s: &str) -> SimResult<Self> {
        match s {
            "factor-regular" | "regular" => Ok(FactorScenario::Regular),
            "factor-irregular" | "irregular" => Ok(FactorScenario::Irregular),
            _ => Err(config(format!("unknown factor scenario '{s}'"))),
        }
    }
}

/// A test statistic evaluated in the factor study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FactorMethod {
    Split { m0: f64 },
    CrossFit { m0: f64, w0: f64 },
    Subsample { m0: f64, b: usize },
}

impl FactorMethod {
    pub fn m0(&self) -> f64 {
        match *self {
            FactorMethod::Split { m0 }
            | FactorMethod::CrossFit { m0, .. }
            | FactorMethod::Subsample { m0, .. } => m0,
        }
    }

    fn label_name(&self) -> String {
        match *self {
            FactorMethod::Split { .. } => "slrt".into(),
            FactorMethod::CrossFit { w0, .. } => format!("crossfit:w0={w0}"),
            FactorMethod::Subsample { b, .. } => format!("subsample:b={b}"),
        }
    }

    /// Default method list: both single-split ratios, three cross-fit
    /// variants and two-split subsampling.
    pub fn defaults() -> Vec<FactorMethod> {
        vec![
            FactorMethod::Split { m0: 0.41 },
            FactorMethod::Split { m0: 0.51 },
            FactorMethod::CrossFit { m0: 0.5, w0: 0.5 },
            FactorMethod::CrossFit { m0: 0.41, w0: 0.5 },
            FactorMethod::CrossFit { m0: 0.41, w0: 0.75 },
            FactorMethod::Subsample { m0: 0.41, b: 2 },
        ]
    }
}

impl fmt::Display for FactorMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FactorMethod::Split { m0 } => write!(f, "split:{m0}"),
            FactorMethod::CrossFit { m0, w0 } => write!(f, "crossfit:{m0}:{w0}"),
            FactorMethod::Subsample { m0, b } => write!(f, "subsample:{m0}:{b}"),
        }
    }
}

impl FromStr for FactorMethod {
    type Err = SimError;

    fn from_str(s: &str) -> SimResult<Self> {
        let bad = || {
            config(format!(
                "method '{s}' must be split:<m0>, crossfit:<m0>:<w0> or subsample:<m0>:<splits>"
            ))
        };
        let parts: Vec<&str> = s.split(':').collect();
        let real = |i: usize| {
            parts
                .get(i)
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(bad)
        };
        let method = match (parts[0], parts.len()) {
            ("split", 2) => FactorMethod::Split { m0: real(1)? },
            ("crossfit", 3) => FactorMethod::CrossFit {
                m0: real(1)?,
                w0: real(2)?,
            },
            ("subsample", 3) => FactorMethod::Subsample {
                m0: real(1)?,
                b: parts[2].parse().map_err(|_| bad())?,
            },
            _ => return Err(bad()),
        };
        let m0 = method.m0();
        if !(m0 > 0.0 && m0 < 1.0) {
            return Err(bad());
        }
        match method {
            FactorMethod::CrossFit { w0, .. } if !(0.0..=1.0).contains(&w0) => Err(bad()),
            FactorMethod::Subsample { b: 0, .. } => Err(bad()),
            _ => Ok(method),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorStudy {
    pub scenarios: Vec<FactorScenario>,
    pub h_grid: Vec<f64>,
    pub methods: Vec<FactorMethod>,
    pub n: usize,
    pub alpha: f64,
    pub n_reps: usize,
    pub seed: u64,
    pub fit: FitOptions,
}

impl Default for FactorStudy {
    fn default() -> Self {
        Self {
            scenarios: FactorScenario::ALL.to_vec(),
            h_grid: linear_grid(0.0, 0.8, 0.1),
            methods: FactorMethod::defaults(),
            n: 2000,
            alpha: 0.05,
            n_reps: 1000,
            seed: 1,
            fit: FitOptions::default(),
        }
    }
}

/// Statistics on one data set, memoized by splitting ratio.
struct SplitCache<'a> {
    model: &'a FactorModel,
    data: &'a Dataset,
    order: &'a [usize],
    forward: HashMap<u64, Option<f64>>,
    swapped: HashMap<u64, Option<f64>>,
}

impl SplitCache<'_> {
    fn lambda(&mut self, m0: f64, swap: bool) -> SimResult<Option<f64>> {
        let table = if swap {
            &mut self.swapped
        } else {
            &mut self.forward
        };
        if let Some(v) = table.get(&m0.to_bits()) {
            return Ok(*v);
        }
        let split = DataSplit::from_order(self.order, m0)?;
        let (eval, est) = if swap {
            (split.d1(), split.d0())
        } else {
            (split.d0(), split.d1())
        };
        let v = tolerate(split_lambda(self.model, self.data, eval, est))?;
        table.insert(m0.to_bits(), v);
        Ok(v)
    }
}

/// One-factor null against two-factor alternatives of strength `h`.
///
/// All methods of a replication share one data set and one random order;
/// subsampling reuses that order as its first split and draws the others
/// afresh.
pub fn run_factor_study(cfg: &FactorStudy) -> SimResult<Vec<PowerGroup>> {
    check_reps(cfg.n_reps)?;
    check_alpha(cfg.alpha)?;
    check_grid("h", &cfg.h_grid)?;
    check_grid("methods", &cfg.methods)?;
    check_grid("scenario", &cfg.scenarios)?;
    let model = FactorModel::with_options(12, cfg.fit)?;
    for method in &cfg.methods {
        let (n0, n1) = split_sizes(cfg.n, method.m0())?;
        if n0.min(n1) <= model.n_vars() {
            return Err(config(format!("n = {} is too small for {method}", cfg.n)));
        }
    }
    let threshold = universal_threshold(cfg.alpha);
    let mut groups = Vec::new();
    for &scenario in &cfg.scenarios {
        for &h in &cfg.h_grid {
            let alt = factor_scenario(scenario == FactorScenario::Regular, h)?;
            let labels: Vec<MethodLabel> = cfg
                .methods
                .iter()
                .map(|m| MethodLabel {
                    name: m.label_name(),
                    m0: Some(m.m0()),
                    value: h,
                })
                .collect();
            let seed = row_seed(cfg.seed, scenario.name(), &format!("h={h}"));
            let methods = labels.iter().map(MethodLabel::key).collect();
            let decisions = replicate(cfg.n_reps, seed, methods, |rng| {
                let data = alt.simulate(cfg.n, rng);
                let order = random_order(cfg.n, rng);
                let mut cache = SplitCache {
                    model: &model,
                    data: &data,
                    order: &order,
                    forward: HashMap::new(),
                    swapped: HashMap::new(),
                };
                let mut out = Vec::with_capacity(cfg.methods.len());
                for method in &cfg.methods {
                    let stat = match *method {
                        FactorMethod::Split { m0 } => cache.lambda(m0, false)?,
                        FactorMethod::CrossFit { m0, w0 } => {
                            match (cache.lambda(m0, false)?, cache.lambda(m0, true)?) {
                                (Some(a), Some(b)) => {
                                    Some(crossfit_result(a, b, w0, cfg.alpha).statistic)
                                }
                                _ => None,
                            }
                        }
                        FactorMethod::Subsample { m0, b } => {
                            let mut lambdas = Vec::with_capacity(b);
                            lambdas.push(cache.lambda(m0, false)?);
                            for _ in 1..b {
                                let split = split_with_rng(cfg.n, m0, rng)?;
                                lambdas.push(tolerate(split_lambda(
                                    &model,
                                    &data,
                                    split.d0(),
                                    split.d1(),
                                ))?);
                            }
                            lambdas
                                .into_iter()
                                .collect::<Option<Vec<f64>>>()
                                .map(|l| subsample_result(l, cfg.alpha).statistic)
                        }
                    };
                    out.push(stat.map(|s| s > threshold));
                }
                Ok(out)
            })?;
            groups.push(PowerGroup {
                scenario: scenario.name().into(),
                variable: "h",
                seed,
                delta: None,
                labels,
                decisions,
            });
        }
    }
    Ok(groups)
}

// ---------------------------------------------------------------------------
// Single-distribution utilities

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRow {
    pub index: usize,
    pub value: f64,
}

impl CsvRecord for SampleRow {
    fn header() -> &'static [&'static str] {
        &["index", "value"]
    }

    fn fields(&self) -> Vec<String> {
        vec![self.index.to_string(), fmt_real(self.value)]
    }
}

/// `n` draws of the requested limit law; draw `i` uses replication stream `i`.
pub fn sample_rows(
    params: &SplitChiSqParams,
    variant: LimitVariant,
    n: usize,
    seed: u64,
) -> SimResult<Vec<SampleRow>> {
    let bank = LimitBank::generate(params.d(), params.p(), n, seed)?;
    Ok(bank
        .draws(params.m0(), params.delta(), variant)?
        .into_iter()
        .enumerate()
        .map(|(index, value)| SampleRow { index, value })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentRow {
    pub quantity: String,
    pub closed_form: Option<f64>,
    pub quadratic_form: f64,
}

impl CsvRecord for MomentRow {
    fn header() -> &'static [&'static str] {
        &["quantity", "closed_form", "quadratic_form"]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.quantity.clone(),
            fmt_opt_real(self.closed_form),
            fmt_real(self.quadratic_form),
        ]
    }
}

/// Mean, variance and the third and fourth cumulants of a limit law.
pub fn moment_rows(params: &SplitChiSqParams, variant: LimitVariant) -> SimResult<Vec<MomentRow>> {
    variant.validate()?;
    let (closed, spec) = match variant {
        LimitVariant::Split => (
            Some(split_moments(params)),
            QuadraticFormSpec::split_construction(params),
        ),
        LimitVariant::CrossFit { w0 } => (
            (w0 == 0.5).then(|| even_crossfit_moments(params)),
            QuadraticFormSpec::weighted_crossfit_construction(params, w0)?,
        ),
    };
    let oracle = quadratic_form_moments(&spec, 4)?;
    let mut rows = vec![
        MomentRow {
            quantity: "mean".into(),
            closed_form: closed.as_ref().map(|c| c.mean),
            quadratic_form: oracle.mean,
        },
        MomentRow {
            quantity: "variance".into(),
            closed_form: closed.as_ref().map(|c| c.variance),
            quadratic_form: oracle.variance,
        },
    ];
    for order in [3, 4] {
        rows.push(MomentRow {
            quantity: format!("cumulant{order}"),
            closed_form: None,
            quadratic_form: oracle.cumulants[order - 1],
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalSplitRow {
    pub d: usize,
    pub k: usize,
    pub method: SplitMethod,
    pub m0: f64,
    pub delta: Option<f64>,
    pub power: Option<f64>,
}

impl CsvRecord for OptimalSplitRow {
    fn header() -> &'static [&'static str] {
        &["d", "k", "method", "m0", "delta", "power"]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.d.to_string(),
            self.k.to_string(),
            self.method.as_str().into(),
            fmt_real(self.m0),
            fmt_opt_real(self.delta),
            fmt_opt_real(self.power),
        ]
    }
}

/// Splitting ratios from each requested rule. Closed-form rules have no
/// associated noncentrality or power.
pub fn optimal_split_rows(
    d: usize,
    k: usize,
    methods: &[SplitMethod],
    search: &SplitSearchConfig,
) -> SimResult<Vec<OptimalSplitRow>> {
    check_grid("method", methods)?;
    methods
        .iter()
        .map(|&method| {
            let r = optimal_split(method, d, k, search)?;
            let searched = !matches!(
                method,
                SplitMethod::RadiusMinimizing | SplitMethod::RuleOfThumb
            );
            Ok(OptimalSplitRow {
                d,
                k,
                method,
                m0: r.m0_opt,
                delta: searched.then_some(r.delta_used),
                power: searched.then_some(r.achieved_power),
            })
        })
        .collect()
}
