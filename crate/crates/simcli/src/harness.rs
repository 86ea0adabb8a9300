//! Replication machinery shared by the studies.

use crate::error::SimResult;
use rayon::prelude::*;
use splitlrt::rng::{derive_seed, label_tag, replication_rng, SimRng};

/// Decision of one method in one replication; `None` when the statistic
/// could not be computed (for example a fit that did not converge).
pub type Outcome = Option<bool>;

/// Seed for one row of one study.
pub fn row_seed(seed: u64, scenario: &str, row: &str) -> u64 {
    derive_seed(derive_seed(seed, label_tag(scenario)), label_tag(row))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodSummary {
    pub rejections: usize,
    /// Replications with a usable statistic.
    pub reps: usize,
    pub failures: usize,
    pub power: f64,
    pub std_error: f64,
}

/// `p̂_a − p̂_b` over replications where both methods succeeded, with the
/// standard error of the paired differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedDifference {
    pub difference: f64,
    pub std_error: f64,
    pub reps: usize,
}

impl PairedDifference {
    /// True unless `a` is worse than `b` by more than `k` standard errors.
    pub fn not_worse(&self, k: f64) -> bool {
        self.difference >= -k * self.std_error
    }
}

pub fn paired_difference(a: &[Outcome], b: &[Outcome]) -> PairedDifference {
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .filter_map(|(x, y)| Some(f64::from(u8::from((*x)?)) - f64::from(u8::from((*y)?))))
        .collect();
    let n = diffs.len();
    if n == 0 {
        return PairedDifference {
            difference: f64::NAN,
            std_error: f64::NAN,
            reps: 0,
        };
    }
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n as f64;
    PairedDifference {
        difference: mean,
        std_error: (var / n as f64).sqrt(),
        reps: n,
    }
}

pub fn summarize(outcomes: &[Outcome]) -> MethodSummary {
    let reps = outcomes.iter().filter(|o| o.is_some()).count();
    let rejections = outcomes.iter().filter(|o| **o == Some(true)).count();
    let power = if reps > 0 {
        rejections as f64 / reps as f64
    } else {
        f64::NAN
    };
    MethodSummary {
        rejections,
        reps,
        failures: outcomes.len() - reps,
        power,
        std_error: (power * (1.0 - power) / reps as f64).sqrt(),
    }
}

/// Per-replication decisions of several methods evaluated on common data.
#[derive(Debug, Clone, PartialEq)]
pub struct Decisions {
    pub methods: Vec<String>,
    /// `outcomes[method][rep]`.
    pub outcomes: Vec<Vec<Outcome>>,
}

impl Decisions {
    pub fn n_reps(&self) -> usize {
        self.outcomes.first().map_or(0, Vec::len)
    }

    pub fn index(&self, method: &str) -> Option<usize> {
        self.methods.iter().position(|m| m == method)
    }

    pub fn summary(&self, j: usize) -> MethodSummary {
        summarize(&self.outcomes[j])
    }

    pub fn paired(&self, a: usize, b: usize) -> PairedDifference {
        paired_difference(&self.outcomes[a], &self.outcomes[b])
    }
}

/// Run `n_reps` replications of `f`, which returns one outcome per method.
/// Replication `i` gets `replication_rng(seed, i)`.
pub fn replicate<F>(n_reps: usize, seed: u64, methods: Vec<String>, f: F) -> SimResult<Decisions>
where
    F: Fn(&mut SimRng) -> SimResult<Vec<Outcome>> + Sync,
{
    let rows: Vec<Vec<Outcome>> = (0..n_reps as u64)
        .into_par_iter()
        .map(|i| f(&mut replication_rng(seed, i)))
        .collect::<SimResult<_>>()?;
    let mut outcomes = vec![Vec::with_capacity(n_reps); methods.len()];
    for row in rows {
        debug_assert_eq!(row.len(), methods.len());
        for (col, o) in outcomes.iter_mut().zip(row) {
            col.push(o);
        }
    }
    Ok(Decisions { methods, outcomes })
}
