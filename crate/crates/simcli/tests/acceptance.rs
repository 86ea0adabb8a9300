//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Pass criterion numbers as arguments to run a
//! subset, e.g. `cargo test --test acceptance -- 3 8`.

use rand::Rng;
use rayon::prelude::*;
use splitlrt::models::{FitOptions, GaussianMeanModel};
use splitlrt::ratio::{
    confidence_radius_split, optimal_split_crossfit, optimal_split_normal, SplitSearchConfig,
};
use splitlrt::rng::{derive_seed, label_tag, replication_rng};
use splitlrt::slrt::{split_lambda, DataSplit, Dataset, SplitModel};
use splitlrt::splitchisq::{
    even_crossfit_moments, ks_critical_value, ks_distance, quadratic_form_moments,
    sample_split_chisq, split_moments, QuadraticFormSpec,
};
use splitlrt::SplitChiSqParams;
use splitlrt_sim::harness::{replicate, summarize, Outcome};
use splitlrt_sim::studies::{
    run_factor_study, run_power_vs_n, run_split_comparison, DeltaRule, FactorMethod,
    FactorScenario, FactorStudy, KRule, PowerGroup, PowerVsN, SplitComparison,
};
use std::process::Command;
use std::time::{Duration, Instant};

const ALPHA: f64 = 0.05;

type Check = Result<(bool, String), String>;

fn seed_for(label: &str) -> u64 {
    derive_seed(20_240_601, label_tag(label))
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs()
    }
}

// 1 ------------------------------------------------------------------------

fn moment_oracle() -> Check {
    let mut rng = replication_rng(seed_for("moment-oracle"), 0);
    let mut worst = 0.0f64;
    let mut at = String::new();
    for _ in 0..100 {
        let d = rng.random_range(1..=50usize);
        let p = rng.random_range(0..=d);
        let m0 = rng.random_range(0.05..=0.95);
        let delta = if p == 0 {
            0.0
        } else {
            rng.random_range(0.0..=100.0)
        };
        let params = SplitChiSqParams::new(d, p, m0, delta).map_err(err)?;
        let pairs = [
            (
                QuadraticFormSpec::split_construction(&params),
                split_moments(&params),
            ),
            (
                QuadraticFormSpec::weighted_crossfit_construction(&params, 0.5).map_err(err)?,
                even_crossfit_moments(&params),
            ),
        ];
        for (spec, closed) in pairs {
            let qf = quadratic_form_moments(&spec, 2).map_err(err)?;
            for e in [
                rel_err(qf.mean, closed.mean),
                rel_err(qf.variance, closed.variance),
            ] {
                if e > worst {
                    worst = e;
                    at = format!("d={d} p={p} m0={m0:.4} delta={delta:.3}");
                }
            }
        }
    }
    Ok((
        worst <= 1e-10,
        format!("max relative error {worst:.2e} at {at}"),
    ))
}

// 2 ------------------------------------------------------------------------

fn sampler_moments() -> Check {
    let n = 1_000_000u64;
    let mut worst = 0.0f64;
    let mut at = String::new();
    let mut i = 0u64;
    for d in [6usize, 60] {
        for p in [1, d / 2, d] {
            for m0 in [0.3, 0.7] {
                let params = SplitChiSqParams::central(d, p, m0).map_err(err)?;
                let seed = seed_for("sampler-moments") ^ i;
                i += 1;
                let (s1, s2) = (0..n)
                    .into_par_iter()
                    .map(|j| {
                        let z = sample_split_chisq(&params, &mut replication_rng(seed, j));
                        (z, z * z)
                    })
                    .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
                let nf = n as f64;
                let mean = s1 / nf;
                let var = (s2 - nf * mean * mean) / (nf - 1.0);
                let exact = split_moments(&params);
                // Standard errors from the independent cumulant oracle.
                let k = QuadraticFormSpec::split_construction(&params).cumulants(4);
                let se_mean = (k[1] / nf).sqrt();
                let se_var = ((k[3] + 2.0 * k[1] * k[1]) / nf).sqrt();
                for z in [
                    (mean - exact.mean) / se_mean,
                    (var - exact.variance) / se_var,
                ] {
                    if z.abs() > worst {
                        worst = z.abs();
                        at = format!("d={d} p={p} m0={m0}");
                    }
                }
            }
        }
    }
    Ok((
        worst <= 4.0,
        format!("12 tuples, largest deviation {worst:.2} s.e. at {at}"),
    ))
}

// 3 ------------------------------------------------------------------------

fn optimal_split_041() -> Check {
    let cfg = SplitSearchConfig::default();
    let algo = optimal_split_normal(78, 54, &cfg).map_err(err)?;
    let radius = confidence_radius_split(78, ALPHA).map_err(err)?;
    let rounded = (radius * 100.0).round() / 100.0;
    let pass =
        (algo.m0_opt - 0.41).abs() <= 0.03 && (radius - 0.5094).abs() <= 0.001 && rounded == 0.51;
    Ok((
        pass,
        format!(
            "algorithm {:.4}, radius split {radius:.5} (rounds to {rounded})",
            algo.m0_opt
        ),
    ))
}

// 4 ------------------------------------------------------------------------

fn crossfit_even_split() -> Check {
    let mut pass = true;
    let mut parts = Vec::new();
    for (d, p) in [(6, 3), (20, 10), (78, 54)] {
        let cfg = SplitSearchConfig {
            m0_range: (0.1, 0.9),
            seed: seed_for(&format!("crossfit-split,d={d},p={p}")),
            ..SplitSearchConfig::default()
        };
        let r = optimal_split_crossfit(d, p, &cfg).map_err(err)?;
        pass &= (r.m0_opt - 0.5).abs() <= 0.02;
        parts.push(format!("({d},{p}) -> {:.2}", r.m0_opt));
    }
    Ok((pass, parts.join(", ")))
}

// 5 ------------------------------------------------------------------------

fn limit_law_agreement() -> Check {
    let (n, d) = (5000usize, 6usize);
    let reps = 10_000u64;
    let limit_reps = 100_000u64;
    let ps = [1usize, 3, 6];
    let m0s = [0.3, 0.5, 0.7];
    let alt_shift = 2.0 / (n as f64).sqrt();
    let seed = seed_for("limit-law");
    let models: Vec<GaussianMeanModel> = ps
        .iter()
        .map(|&p| GaussianMeanModel::new(d, d - p))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    // One noise draw and one order per replication serve every (p, m0)
    // cell; the alternative is the same noise shifted by h/√n.
    let stats: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|i| {
            let mut rng = replication_rng(seed, i);
            let null = models[2].simulate(&vec![0.0; d], n, &mut rng);
            let shifted: Vec<f64> = null.rows().flatten().map(|x| x + alt_shift).collect();
            let alt = Dataset::new(d, shifted).map_err(err)?;
            let mut order: Vec<usize> = (0..n).collect();
            rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
            let mut out = Vec::with_capacity(18);
            for model in &models {
                for &m0 in &m0s {
                    let split = DataSplit::from_order(&order, m0).map_err(err)?;
                    for data in [&null, &alt] {
                        out.push(split_lambda(model, data, split.d0(), split.d1()).map_err(err)?);
                    }
                }
            }
            Ok(out)
        })
        .collect::<Result<_, String>>()?;
    let crit = ks_critical_value(reps as usize, limit_reps as usize, 0.01).map_err(err)?;
    let mut worst = 0.0f64;
    let mut at = String::new();
    let mut col = 0;
    for &p in &ps {
        for &m0 in &m0s {
            for delta in [0.0, 4.0 * p as f64] {
                let params = SplitChiSqParams::new(d, p, m0, delta).map_err(err)?;
                let lseed = seed_for(&format!("limit-draws,p={p},m0={m0},delta={delta}"));
                let limit: Vec<f64> = (0..limit_reps)
                    .into_par_iter()
                    .map(|j| sample_split_chisq(&params, &mut replication_rng(lseed, j)))
                    .collect();
                let sample: Vec<f64> = stats.iter().map(|s| s[col]).collect();
                col += 1;
                let ks = ks_distance(&sample, &limit).map_err(err)?;
                if ks > worst {
                    worst = ks;
                    at = format!("p={p} m0={m0} delta={delta}");
                }
            }
        }
    }
    Ok((
        worst < crit,
        format!("18 cells, largest KS distance {worst:.4} at {at}, 1% critical value {crit:.4}"),
    ))
}

// 6 ------------------------------------------------------------------------

fn size_ok(outcomes: &[Outcome]) -> (bool, f64, usize) {
    let s = summarize(outcomes);
    let se = (ALPHA * (1.0 - ALPHA) / s.reps as f64).sqrt();
    (s.power <= ALPHA + 3.0 * se, s.power, s.failures)
}

fn validity_sweep() -> Check {
    let mut pass = true;
    let mut worst = (0.0f64, String::new());
    let mut failures = 0;
    let model = GaussianMeanModel::new(6, 3).map_err(err)?;
    // Nuisance coordinates off zero so the null is not the origin.
    let theta = vec![0.0, 0.0, 0.0, 0.3, -0.2, 0.5];
    for n in [20usize, 200, 2000] {
        let methods = vec!["slrt".into(), "crossfit".into(), "subsample".into()];
        let seed = seed_for(&format!("validity,gaussian,n={n}"));
        let dec = replicate(10_000, seed, methods, |rng| {
            let data = model.simulate(&theta, n, rng);
            let t = splitlrt::universal_threshold(ALPHA);
            let mut order: Vec<usize> = (0..n).collect();
            rand::seq::SliceRandom::shuffle(order.as_mut_slice(), rng);
            let split = DataSplit::from_order(&order, 0.5)?;
            let l = split_lambda(&model, &data, split.d0(), split.d1())?;
            let ls = split_lambda(&model, &data, split.d1(), split.d0())?;
            rand::seq::SliceRandom::shuffle(order.as_mut_slice(), rng);
            let second = DataSplit::from_order(&order, 0.5)?;
            let l2 = split_lambda(&model, &data, second.d0(), second.d1())?;
            let sub = splitlrt::slrt::log_mean_evalue_statistic(&[l, l2]);
            Ok(vec![Some(l > t), Some(0.5 * (l + ls) > t), Some(sub > t)])
        })
        .map_err(err)?;
        for (j, name) in dec.methods.iter().enumerate() {
            let (ok, rate, f) = size_ok(&dec.outcomes[j]);
            pass &= ok;
            failures += f;
            if rate >= worst.0 {
                worst = (rate, format!("gaussian n={n} {name}"));
            }
        }
    }
    let groups = run_factor_study(&FactorStudy {
        scenarios: FactorScenario::ALL.to_vec(),
        h_grid: vec![0.0],
        methods: vec![
            FactorMethod::Split { m0: 0.41 },
            FactorMethod::Split { m0: 0.51 },
            FactorMethod::CrossFit { m0: 0.5, w0: 0.5 },
            FactorMethod::Subsample { m0: 0.41, b: 2 },
        ],
        n: 2000,
        alpha: ALPHA,
        n_reps: 1000,
        seed: seed_for("validity,factor"),
        fit: FitOptions::default(),
    })
    .map_err(err)?;
    for g in &groups {
        for (j, label) in g.labels.iter().enumerate() {
            let (ok, rate, f) = size_ok(&g.decisions.outcomes[j]);
            pass &= ok;
            failures += f;
            if rate >= worst.0 {
                worst = (
                    rate,
                    format!("{} {}@{:?}", g.scenario, label.name, label.m0),
                );
            }
        }
    }
    Ok((
        pass,
        format!(
            "largest size {:.4} ({}), bound {:.4} at 10^4 reps / {:.4} at 1000 reps, {failures} failed fits",
            worst.0,
            worst.1,
            ALPHA + 3.0 * (ALPHA * (1.0 - ALPHA) / 1e4).sqrt(),
            ALPHA + 3.0 * (ALPHA * (1.0 - ALPHA) / 1e3).sqrt(),
        ),
    ))
}

// 7 ------------------------------------------------------------------------

/// Smallest `(p̂_a − p̂_b) / joint s.e.` over groups; ties count as zero.
fn worst_paired(
    groups: &[PowerGroup],
    pick: impl Fn(&PowerGroup) -> Option<(usize, usize)>,
) -> Result<f64, String> {
    let mut worst = f64::INFINITY;
    for g in groups {
        let (a, b) = pick(g).ok_or_else(|| format!("{}: method missing", g.scenario))?;
        let diff = g.decisions.paired(a, b);
        let z = if diff.difference == 0.0 {
            0.0
        } else {
            diff.difference / diff.std_error
        };
        worst = worst.min(z);
    }
    Ok(worst)
}

fn power_orderings() -> Check {
    let mut parts = Vec::new();
    let mut pass = true;

    let mut lrt_asym = f64::INFINITY;
    let mut asym_uni = f64::INFINITY;
    for (d, k) in [(6usize, 0usize), (6, 3), (60, 0), (60, 30)] {
        let groups = run_power_vs_n(&PowerVsN {
            d,
            k,
            n_reps: 10_000,
            seed: seed_for(&format!("orderings,n,d={d},k={k}")),
            ..PowerVsN::default()
        })
        .map_err(err)?;
        lrt_asym = lrt_asym.min(worst_paired(&groups, |g| {
            Some((g.find("lrt", None)?, g.find("slrt-asymptotic", Some(0.5))?))
        })?);
        asym_uni = asym_uni.min(worst_paired(&groups, |g| {
            Some((
                g.find("slrt-asymptotic", Some(0.5))?,
                g.find("slrt-universal", Some(0.5))?,
            ))
        })?);
    }
    pass &= lrt_asym >= -2.0 && asym_uni >= -2.0;
    parts.push(format!(
        "LRT-Asym min z {lrt_asym:.2}, Asym-SLRT min z {asym_uni:.2}"
    ));

    let mut normal_radius = f64::INFINITY;
    let mut retention = f64::INFINITY;
    let by_name = |g: &PowerGroup, name: &str| g.labels.iter().position(|l| l.name == name);
    for k_rule in [KRule::Fixed(5), KRule::Fraction(6)] {
        for delta_rule in [
            DeltaRule::Fixed(100.0),
            DeltaRule::Fixed(250.0),
            DeltaRule::Calibrated(0.8),
        ] {
            let groups = run_split_comparison(&SplitComparison {
                d_grid: vec![6, 12, 24, 48, 96],
                k_rule,
                delta_rule,
                alpha: ALPHA,
                n_reps: 10_000,
                seed: seed_for(&format!("orderings,split,{k_rule},{delta_rule}")),
            })
            .map_err(err)?;
            normal_radius = normal_radius.min(worst_paired(&groups, |g| {
                Some((by_name(g, "normal")?, by_name(g, "radius")?))
            })?);
            if let DeltaRule::Calibrated(target) = delta_rule {
                for g in &groups {
                    let s = summarize(
                        &g.decisions.outcomes[by_name(g, "normal").ok_or("normal split missing")?],
                    );
                    retention = retention.min((s.power - target) / s.std_error);
                }
            }
        }
    }
    pass &= normal_radius >= -2.0 && retention >= -2.0;
    parts.push(format!(
        "normal-radius min z {normal_radius:.2}, calibrated normal split vs target min z {retention:.2}"
    ));

    let groups = run_factor_study(&FactorStudy {
        scenarios: FactorScenario::ALL.to_vec(),
        h_grid: vec![0.4],
        methods: vec![
            FactorMethod::Split { m0: 0.41 },
            FactorMethod::Split { m0: 0.51 },
        ],
        n: 2000,
        alpha: ALPHA,
        n_reps: 10_000,
        seed: seed_for("orderings,factor"),
        fit: FitOptions::default(),
    })
    .map_err(err)?;
    let factor = worst_paired(&groups, |g| {
        Some((g.find("slrt", Some(0.41))?, g.find("slrt", Some(0.51))?))
    })?;
    let powers: Vec<String> = groups
        .iter()
        .map(|g| {
            format!(
                "{} {:.3}/{:.3}",
                g.scenario,
                summarize(&g.decisions.outcomes[0]).power,
                summarize(&g.decisions.outcomes[1]).power
            )
        })
        .collect();
    pass &= factor >= -2.0;
    parts.push(format!(
        "factor h=0.4 0.41-0.51 min z {factor:.2} ({})",
        powers.join(", ")
    ));
    Ok((pass, parts.join("; ")))
}

// 8 ------------------------------------------------------------------------

fn variance_dominance() -> Check {
    let mut checked = 0usize;
    let mut worst_oracle = 0.0f64;
    for d in 1..=100usize {
        for k in 0..=d {
            let p = d - k;
            let deltas: &[f64] = if p == 0 {
                &[0.0]
            } else {
                &[0.0, 0.5, 1.0, 2.5, 10.0, 40.0, 100.0, 250.0]
            };
            for &delta in deltas {
                let params = SplitChiSqParams::new(d, p, 0.5, delta).map_err(err)?;
                let gap = split_moments(&params).variance - even_crossfit_moments(&params).variance;
                if gap != p as f64 + delta {
                    return Ok((
                        false,
                        format!(
                            "d={d} p={p} delta={delta}: gap {gap} != {}",
                            p as f64 + delta
                        ),
                    ));
                }
                checked += 1;
                if d <= 20 && delta == 10.0 {
                    // The cumulant oracle agrees on a subset.
                    let a =
                        quadratic_form_moments(&QuadraticFormSpec::split_construction(&params), 2)
                            .map_err(err)?;
                    let b = QuadraticFormSpec::weighted_crossfit_construction(&params, 0.5)
                        .map_err(err)?;
                    let b = quadratic_form_moments(&b, 2).map_err(err)?;
                    worst_oracle =
                        worst_oracle.max(rel_err(a.variance - b.variance, p as f64 + delta));
                }
            }
        }
    }
    Ok((
        worst_oracle <= 1e-10,
        format!("{checked} parameter sets exact; oracle relative error {worst_oracle:.1e}"),
    ))
}

// 9 ------------------------------------------------------------------------

fn determinism() -> Check {
    let invocations: &[&[&str]] = &[
        &[
            "sample", "--d", "6", "--p", "3", "--delta", "40", "--reps", "3000",
        ],
        &[
            "sample",
            "--d",
            "6",
            "--p",
            "6",
            "--variant",
            "crossfit",
            "--w0",
            "0.7",
            "--reps",
            "3000",
        ],
        &[
            "moments", "--d", "20", "--p", "10", "--m0", "0.3", "--delta", "12",
        ],
        &["quantile", "--reps", "20000"],
        &[
            "optimal-split",
            "--d",
            "78",
            "--k",
            "24",
            "--method",
            "normal,mc,radius,thumb,crossfit",
            "--reps",
            "20000",
        ],
        &[
            "power-vs-n",
            "--reps",
            "2000",
            "--limit-reps",
            "20000",
            "--n",
            "50,200",
        ],
        &[
            "power-vs-split",
            "--d",
            "60",
            "--p",
            "10,50",
            "--delta",
            "180",
            "--reps",
            "20000",
        ],
        &[
            "split-comparison",
            "--k-rule",
            "d/6",
            "--delta-rule",
            "target:0.8",
            "--reps",
            "20000",
        ],
        &[
            "factor-study",
            "--h",
            "0,0.4",
            "--n",
            "500",
            "--reps",
            "100",
        ],
    ];
    let bin = env!("CARGO_BIN_EXE_splitlrt-sim");
    for args in invocations {
        let mut reference: Option<Vec<u8>> = None;
        for threads in ["1", "2", "7"] {
            let out = Command::new(bin)
                .args(["--seed", "17", "--threads", threads])
                .args(*args)
                .output()
                .map_err(err)?;
            if !out.status.success() {
                return Err(format!(
                    "{args:?} failed: {}",
                    String::from_utf8_lossy(&out.stderr)
                ));
            }
            match &reference {
                None => reference = Some(out.stdout),
                Some(r) if *r != out.stdout => {
                    return Ok((false, format!("{args:?} differs at --threads {threads}")));
                }
                Some(_) => {}
            }
        }
    }
    Ok((
        true,
        format!(
            "{} invocations identical at 1, 2 and 7 threads",
            invocations.len()
        ),
    ))
}

// ---------------------------------------------------------------------------

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Option<Duration>,
    run: fn() -> Check,
}

fn main() {
    let criteria = [
        Criterion {
            id: 1,
            name: "moment closed forms vs quadratic-form oracle",
            budget: Some(Duration::from_secs(5)),
            run: moment_oracle,
        },
        Criterion {
            id: 2,
            name: "sampler vs moments",
            budget: Some(Duration::from_secs(60)),
            run: sampler_moments,
        },
        Criterion {
            id: 3,
            name: "optimal split 0.41 and radius split 0.51",
            budget: Some(Duration::from_secs(10)),
            run: optimal_split_041,
        },
        Criterion {
            id: 4,
            name: "cross-fit even-split optimality",
            budget: Some(Duration::from_secs(300)),
            run: crossfit_even_split,
        },
        Criterion {
            id: 5,
            name: "limit-law agreement",
            budget: Some(Duration::from_secs(600)),
            run: limit_law_agreement,
        },
        Criterion {
            id: 6,
            name: "finite-sample validity sweep",
            budget: None,
            run: validity_sweep,
        },
        Criterion {
            id: 7,
            name: "power orderings",
            budget: None,
            run: power_orderings,
        },
        Criterion {
            id: 8,
            name: "variance-dominance identity",
            budget: None,
            run: variance_dominance,
        },
        Criterion {
            id: 9,
            name: "determinism across thread counts",
            budget: None,
            run: determinism,
        },
    ];
    let wanted: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    let mut ran = 0;
    for c in criteria
        .iter()
        .filter(|c| wanted.is_empty() || wanted.contains(&c.id))
    {
        ran += 1;
        let start = Instant::now();
        let result = (c.run)();
        let elapsed = start.elapsed();
        let in_budget = c.budget.is_none_or(|b| elapsed <= b);
        let (ok, detail) = match result {
            Ok((ok, detail)) => (ok && in_budget, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let timing = match c.budget {
            Some(b) => format!("{:.1} s, budget {} s", elapsed.as_secs_f64(), b.as_secs()),
            None => format!("{:.1} s", elapsed.as_secs_f64()),
        };
        println!(
            "{} [{}] {}: {detail} ({timing})",
            if ok { "PASS" } else { "FAIL" },
            c.id,
            c.name
        );
        if !ok {
            failed += 1;
        }
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
