use proptest::prelude::*;
use splitlrt::normal::std_normal_cdf;
use splitlrt::slrt::{crossfit_result, log_mean_evalue_statistic, split_sizes};
use splitlrt::splitchisq::{even_crossfit_moments, split_moments};
use splitlrt::SplitChiSqParams;

proptest! {
    #[test]
    fn split_sizes_cover_the_data(n in 2usize..5000, m0 in 0.01f64..0.99) {
        if let Ok((n0, n1)) = split_sizes(n, m0) {
            prop_assert_eq!(n0 + n1, n);
            prop_assert!(n0 >= 1 && n1 >= 1);
            prop_assert!((n0 as f64 - m0 * n as f64).abs() < 1.0);
        }
    }

    #[test]
    fn variance_gap_at_even_split(d in 1usize..200, k in 0usize..200, delta in 0u32..1000) {
        let k = k.min(d);
        let p = d - k;
        let delta = if p == 0 { 0.0 } else { f64::from(delta) };
        let params = SplitChiSqParams::new(d, p, 0.5, delta).unwrap();
        let gap = split_moments(&params).variance - even_crossfit_moments(&params).variance;
        prop_assert_eq!(gap, p as f64 + delta);
    }

    #[test]
    fn crossfit_mean_matches_split_mean(d in 1usize..100, k in 0usize..100, m0 in 0.05f64..0.95, delta in 0.0f64..100.0) {
        let k = k.min(d);
        let p = d - k;
        let delta = if p == 0 { 0.0 } else { delta };
        let params = SplitChiSqParams::new(d, p, m0, delta).unwrap();
        // The means differ only through the odds rebalancing term.
        let r = params.odds();
        let split = split_moments(&params).mean;
        let cross = even_crossfit_moments(&params).mean;
        let expect = -0.5 * d as f64 * (1.0 / r - r) + (0.5 - m0) * delta;
        prop_assert!((cross - split - expect).abs() < 1e-9 * (split.abs() + cross.abs() + 1.0));
        prop_assert!(even_crossfit_moments(&params).variance > 0.0);
    }

    #[test]
    fn log_mean_evalue_is_between_max_and_its_discount(lambdas in prop::collection::vec(-500.0f64..500.0, 1..20)) {
        let s = log_mean_evalue_statistic(&lambdas);
        let max = lambdas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let b = lambdas.len() as f64;
        prop_assert!(s <= max + 1e-9);
        prop_assert!(s >= max - 2.0 * b.ln() - 1e-9);
    }

    #[test]
    fn crossfit_result_is_a_weighted_average(l in -50.0f64..50.0, ls in -50.0f64..50.0, w0 in 0.0f64..1.0) {
        let r = crossfit_result(l, ls, w0, 0.05);
        prop_assert!(r.statistic >= l.min(ls) - 1e-12 && r.statistic <= l.max(ls) + 1e-12);
        prop_assert_eq!(r.reject, r.statistic > r.threshold);
    }

    #[test]
    fn normal_cdf_is_monotone(a in -40.0f64..40.0, b in -40.0f64..40.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(std_normal_cdf(lo) <= std_normal_cdf(hi));
    }
}
