use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use splitlrt::rng::replication_rng;
use splitlrt::splitchisq::{
    even_crossfit_moments, ks_critical_value, ks_distance, mc_cdf, mc_quantile, moments,
    quadratic_form_moments, raw_moments_from_cumulants, sample_limit, sample_limit_along,
    split_moments, QuadraticFormSpec,
};
use splitlrt::{universal_threshold, LimitVariant, SplitChiSqParams};

fn draws(params: &SplitChiSqParams, variant: LimitVariant, n: usize, seed: u64) -> Vec<f64> {
    (0..n as u64)
        .into_par_iter()
        .map(|i| sample_limit(params, variant, &mut replication_rng(seed, i)))
        .collect()
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

// Mean and variance of ‖X_p + √m0·h‖² − ‖X − c·Y‖², c² = m0/m1, summed over
// independent coordinates. Put the whole shift a = √(m0·δ) on one coordinate.
fn hand_moments(d: usize, p: usize, m0: f64, delta: f64) -> (f64, f64) {
    let c2 = m0 / (1.0 - m0);
    let lam = m0 * delta;
    // Untested: −(x − cy)² = −(1 + c²)·χ²₁.
    let untested_mean = -((d - p) as f64) * (1.0 + c2);
    let untested_var = (d - p) as f64 * 2.0 * (1.0 + c2).powi(2);
    // Tested, unshifted: x² − (x − cy)² = 2cxy − c²y², so E = −c² and
    // Var = 4c² + 3c⁴ − c⁴.
    let tested_mean = p as f64 * -c2;
    let tested_var = p as f64 * (4.0 * c2 + 2.0 * c2 * c2);
    // The shift adds 2a·x + a², uncorrelated with 2cxy − c²y².
    (
        untested_mean + tested_mean + lam,
        untested_var + tested_var + 4.0 * lam,
    )
}

#[test]
fn closed_forms_match_elementary_derivation() {
    for &(d, p, m0, delta) in &[
        (1, 1, 0.5, 0.0),
        (6, 3, 0.5, 40.0),
        (6, 6, 0.3, 2.5),
        (60, 10, 0.2, 0.0),
        (20, 0, 0.7, 0.0),
    ] {
        let params = SplitChiSqParams::new(d, p, m0, delta).unwrap();
        let s = split_moments(&params);
        let (m, v) = hand_moments(d, p, m0, delta);
        assert!(
            (s.mean - m).abs() <= 1e-12 * m.abs().max(1.0),
            "{d} {p} {m0} {delta}"
        );
        assert!((s.variance - v).abs() <= 1e-12 * v, "{d} {p} {m0} {delta}");
    }
}

#[test]
fn worked_examples() {
    let s = split_moments(&SplitChiSqParams::new(2, 2, 0.5, 0.0).unwrap());
    assert_eq!((s.mean, s.variance), (-2.0, 12.0));
    let s = split_moments(&SplitChiSqParams::new(6, 3, 0.5, 40.0).unwrap());
    assert_eq!((s.mean, s.variance), (11.0, 122.0));
    let c = even_crossfit_moments(&SplitChiSqParams::new(6, 6, 0.5, 0.0).unwrap());
    assert_eq!((c.mean, c.variance), (-6.0, 30.0));
}

#[test]
fn sampler_reproduces_moments() {
    let n = 1_000_000;
    for (i, &(d, p, m0, delta, variant)) in [
        (1, 1, 0.5, 0.0, LimitVariant::Split),
        (6, 3, 0.5, 40.0, LimitVariant::Split),
        (6, 6, 0.5, 0.0, LimitVariant::EVEN_CROSSFIT),
        (6, 2, 0.35, 12.0, LimitVariant::CrossFit { w0: 0.75 }),
    ]
    .iter()
    .enumerate()
    {
        let params = SplitChiSqParams::new(d, p, m0, delta).unwrap();
        let target = moments(&params, variant).unwrap();
        let x = draws(&params, variant, n, 100 + i as u64);
        let (m, _) = mean_var(&x);
        let se = (target.variance / n as f64).sqrt();
        assert!(
            (m - target.mean).abs() < 3.0 * se,
            "case {i}: mean {m} vs {} (se {se})",
            target.mean
        );
    }
}

#[test]
fn crossfit_keeps_the_mean_and_shrinks_the_variance() {
    let n = 400_000;
    let params = SplitChiSqParams::new(6, 3, 0.5, 40.0).unwrap();
    let a = draws(&params, LimitVariant::Split, n, 7);
    let b = draws(&params, LimitVariant::EVEN_CROSSFIT, n, 8);
    let (ma, va) = mean_var(&a);
    let (mb, vb) = mean_var(&b);
    let se = ((va + vb) / n as f64).sqrt();
    assert!((ma - mb).abs() < 3.0 * se, "{ma} vs {mb}");
    assert!(vb < va);
}

#[test]
fn quadratic_form_oracle_matches_closed_forms() {
    let mut rng = replication_rng(42, 0);
    for _ in 0..100 {
        let d = rng.random_range(1..=50usize);
        let p = rng.random_range(0..=d);
        let m0 = rng.random_range(0.05..0.95);
        let delta = if p == 0 {
            0.0
        } else {
            rng.random_range(0.0..100.0)
        };
        let params = SplitChiSqParams::new(d, p, m0, delta).unwrap();
        let cases = [
            (
                QuadraticFormSpec::split_construction(&params),
                split_moments(&params),
            ),
            (
                QuadraticFormSpec::weighted_crossfit_construction(&params, 0.5).unwrap(),
                even_crossfit_moments(&params),
            ),
        ];
        for (spec, closed) in cases {
            let qf = quadratic_form_moments(&spec, 2).unwrap();
            // Relative to the size of the terms that cancel in the mean.
            let scale = closed.variance.sqrt() + closed.mean.abs();
            assert!((qf.mean - closed.mean).abs() <= 1e-10 * scale, "{params:?}");
            assert!(
                (qf.variance - closed.variance).abs() <= 1e-10 * closed.variance,
                "{params:?}"
            );
        }
    }
}

#[test]
fn identity_form_is_chi_square() {
    let m = 7;
    let spec = QuadraticFormSpec::new(
        DMatrix::identity(m, m),
        DMatrix::identity(m, m),
        DVector::zeros(m),
        1.0,
    )
    .unwrap();
    let s = quadratic_form_moments(&spec, 2).unwrap();
    assert!((s.mean - 7.0).abs() < 1e-12 && (s.variance - 14.0).abs() < 1e-12);
}

#[test]
fn third_raw_moment_against_simulation() {
    let a = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, -0.2, 0.5, -1.0, 0.3, -0.2, 0.3, 0.4]);
    let spec =
        QuadraticFormSpec::new(a.clone(), DMatrix::identity(3, 3), DVector::zeros(3), 1.0).unwrap();
    let exact = raw_moments_from_cumulants(&spec.cumulants(3))[2];
    let n = 1_000_000u64;
    let cubes: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = replication_rng(9, i);
            let e = DVector::from_fn(3, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
            e.dot(&(&a * &e)).powi(3)
        })
        .collect();
    let (m, v) = mean_var(&cubes);
    let se = (v / n as f64).sqrt();
    assert!((m - exact).abs() < 4.0 * se, "{m} vs {exact} (se {se})");
}

#[test]
fn law_depends_on_the_direction_only_through_its_norm() {
    let n = 20_000;
    let params = SplitChiSqParams::new(6, 3, 0.4, 9.0).unwrap();
    let h = [1.0, -2.0, 2.0]; // ‖h‖² = 9
    let along: Vec<f64> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            sample_limit_along(
                &params,
                LimitVariant::Split,
                &h,
                &mut replication_rng(11, i),
            )
            .unwrap()
        })
        .collect();
    let canonical = draws(&params, LimitVariant::Split, n, 12);
    let dist = ks_distance(&along, &canonical).unwrap();
    assert!(dist < ks_critical_value(n, n, 0.01).unwrap(), "KS {dist}");
}

#[test]
fn null_quantiles_sit_below_the_universal_threshold() {
    let t = universal_threshold(0.05);
    for p in 1..=6 {
        for i in 1..=9 {
            let params = SplitChiSqParams::central(6, p, i as f64 / 10.0).unwrap();
            let q = mc_quantile(&params, LimitVariant::Split, 0.95, 20_000, 5).unwrap();
            assert!(q < t, "p {p} m0 {} quantile {q}", i as f64 / 10.0);
        }
    }
    let params = SplitChiSqParams::central(6, 6, 0.5).unwrap();
    let cdf = mc_cdf(&params, LimitVariant::Split, t, 100_000, 3).unwrap();
    assert!(cdf.estimate >= 0.95 - 3.0 * cdf.std_error);
    let big = SplitChiSqParams::central(60, 10, 0.2).unwrap();
    let q1 = mc_quantile(&big, LimitVariant::Split, 0.95, 10_000, 4).unwrap();
    let q2 = mc_quantile(&big, LimitVariant::Split, 0.95, 10_000, 4).unwrap();
    assert!(q1.is_finite());
    assert_eq!(q1.to_bits(), q2.to_bits());
}
