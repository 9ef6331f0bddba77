use proptest::prelude::*;

use dispersia::dist::sample;
use dispersia::fitting::{fit_mle, plug_in_variance};
use dispersia::gof::{bin_counts, equal_prob_bins, ks_statistic, pearson_from_counts};
use dispersia::harness::derive_stream_seed;
use dispersia::io::{Cell, ReportTable};
use dispersia::special::{chi2_quantile, reg_gamma_p};
use dispersia::vartest::{alpha_condition, mooley_pvalue, statistic_d, DfConvention, VarianceFunction};
use dispersia::{DistributionSpec, Error, Family, RngStream};

fn continuous_spec() -> impl Strategy<Value = DistributionSpec> {
    prop_oneof![
        (0.01f64..100.0).prop_map(|m| DistributionSpec::exponential(m).unwrap()),
        (0.05f64..200.0, 0.01f64..100.0).prop_map(|(a, s)| DistributionSpec::gamma(a, s).unwrap()),
        (0.2f64..20.0, 0.01f64..100.0).prop_map(|(k, s)| DistributionSpec::weibull(k, s).unwrap()),
        (-5.0f64..5.0, 0.05f64..3.0).prop_map(|(m, s)| DistributionSpec::log_normal(m, s).unwrap()),
        (-10.0f64..10.0, 0.01f64..50.0).prop_map(|(a, w)| DistributionSpec::uniform(a, a + w).unwrap()),
    ]
}

fn positive_data() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.001f64..1000.0, 5..60)
}

proptest! {
    #[test]
    fn quantile_inverts_cdf(spec in continuous_spec(), p in 1e-6f64..(1.0 - 1e-6)) {
        let x = spec.quantile(p).unwrap();
        let back = spec.cdf(x).unwrap();
        prop_assert!((back - p).abs() <= 1e-9, "{:?}: p={} x={} cdf={}", spec, p, x, back);
    }

    #[test]
    fn cdf_is_monotone(spec in continuous_spec(), p in 0.01f64..0.98, dp in 0.001f64..0.01) {
        let a = spec.quantile(p).unwrap();
        let b = spec.quantile(p + dp).unwrap();
        prop_assert!(a < b);
        prop_assert!(spec.cdf(a).unwrap() <= spec.cdf(b).unwrap());
    }

    #[test]
    fn discrete_quantile_is_smallest_covering_point(mean in 0.1f64..60.0, p in 0.001f64..0.999) {
        let spec = DistributionSpec::poisson(mean).unwrap();
        let k = spec.quantile(p).unwrap();
        prop_assert!(spec.cdf(k).unwrap() >= p - 1e-12);
        if k > 0.0 {
            prop_assert!(spec.cdf(k - 1.0).unwrap() < p);
        }
    }

    #[test]
    fn statistic_is_scale_invariant(data in positive_data(), var in 0.01f64..1e4, c in 1e-3f64..1e3) {
        let d = statistic_d(&data, var).unwrap();
        let scaled: Vec<f64> = data.iter().map(|x| c * x).collect();
        let ds = statistic_d(&scaled, c * c * var).unwrap();
        prop_assert!(d >= 0.0);
        prop_assert!((ds - d).abs() <= 1e-9 * d.max(1e-300), "{} vs {}", d, ds);
    }

    #[test]
    fn fitted_statistic_is_scale_invariant(
        seed in any::<u64>(),
        c in 1e-3f64..1e3,
        family in prop::sample::select(vec![Family::Exponential, Family::Gamma, Family::Weibull, Family::LogNormal]),
    ) {
        let data = sample(&DistributionSpec::gamma(2.5, 1.0).unwrap(), 50, RngStream::new(seed, 0)).unwrap();
        let scaled: Vec<f64> = data.iter().map(|x| c * x).collect();
        let d = statistic_d(&data, plug_in_variance(&fit_mle(family, &data).unwrap())).unwrap();
        let ds = statistic_d(&scaled, plug_in_variance(&fit_mle(family, &scaled).unwrap())).unwrap();
        prop_assert!((ds - d).abs() <= 1e-9 * d, "{:?}: {} vs {}", family, d, ds);
    }

    #[test]
    fn mooley_pvalue_is_a_probability(d in 0.0f64..1e5, n in 2usize..5000) {
        for conv in [DfConvention::N, DfConvention::NMinus1] {
            let p = mooley_pvalue(d, n, conv).unwrap();
            prop_assert!((0.0..=1.0).contains(&p));
        }
    }

    #[test]
    fn chi2_quantile_round_trip(df in 0.5f64..2000.0, p in 1e-8f64..(1.0 - 1e-8)) {
        let x = chi2_quantile(df, p).unwrap();
        let back = reg_gamma_p(0.5 * df, 0.5 * x).unwrap();
        prop_assert!((back - p).abs() <= 1e-9, "df={} p={} back={}", df, p, back);
    }

    #[test]
    fn bin_edges_are_increasing_and_cover_support(spec in continuous_spec(), n in 10usize..2000) {
        let edges = equal_prob_bins(&spec, n, 5.0).unwrap();
        let (lo, hi) = spec.support();
        prop_assert_eq!(edges[0], lo);
        prop_assert_eq!(*edges.last().unwrap(), hi);
        prop_assert!(edges.windows(2).all(|w| w[0] < w[1]));
        prop_assert!((5..=21).contains(&edges.len()));
    }

    #[test]
    fn pearson_is_invariant_under_monotone_transforms(
        data in prop::collection::vec(0.01f64..100.0, 20..200),
        cuts in prop::collection::btree_set(1u32..9999, 3..10),
    ) {
        let mut edges = vec![0.0];
        edges.extend(cuts.iter().map(|&c| c as f64 / 100.0));
        edges.push(f64::INFINITY);
        let g = |x: f64| x.ln();
        let t_data: Vec<f64> = data.iter().map(|&x| g(x)).collect();
        let t_edges: Vec<f64> = edges.iter().map(|&e| g(e)).collect();
        let a = bin_counts(&data, &edges).unwrap();
        let b = bin_counts(&t_data, &t_edges).unwrap();
        prop_assert_eq!(&a, &b);
        let k = a.len() as f64;
        let expected = vec![data.len() as f64 / k; a.len()];
        prop_assert_eq!(pearson_from_counts(&a, &expected, 0).unwrap(), pearson_from_counts(&b, &expected, 0).unwrap());
    }

    #[test]
    fn ks_statistic_is_in_unit_interval(data in prop::collection::vec(-5.0f64..5.0, 1..100)) {
        let d = ks_statistic(&data, |x| 1.0 / (1.0 + (-x).exp())).unwrap();
        prop_assert!(d > 0.0 && d <= 1.0);
        prop_assert!(d >= 0.5 / data.len() as f64 - 1e-15);
    }

    #[test]
    fn alpha_rejects_inconsistent_variance_function(mean in 0.1f64..50.0, factor in 1.01f64..5.0) {
        let m = DistributionSpec::poisson(mean).unwrap().moments().unwrap();
        let f = VarianceFunction::new("c x", move |x| factor * x, None);
        let inconsistent = matches!(alpha_condition(&m, &f), Err(Error::ModelInconsistency { .. }));
        prop_assert!(inconsistent);
    }

    #[test]
    fn alpha_gamma_known_shape(shape in 0.05f64..500.0, scale in 0.01f64..100.0) {
        let m = DistributionSpec::gamma(shape, scale).unwrap().moments().unwrap();
        let alpha = alpha_condition(&m, &VarianceFunction::gamma_known_shape(shape)).unwrap();
        prop_assert!((alpha - (2.0 + 2.0 / shape)).abs() <= 1e-9 * alpha);
    }

    #[test]
    fn alpha_finite_difference_matches_analytic(size in 2u64..500, p in 0.02f64..0.98) {
        let m = DistributionSpec::binomial(size, p).unwrap().moments().unwrap();
        let f = VarianceFunction::binomial(size);
        let a = alpha_condition(&m, &f).unwrap();
        let b = alpha_condition(&m, &f.without_analytic_derivative()).unwrap();
        prop_assert!((a - b).abs() <= 1e-6 * a.abs());
    }

    #[test]
    fn csv_report_round_trips(values in prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 0..30)) {
        let mut t = ReportTable::new("", &["i", "x"]);
        for (i, &x) in values.iter().enumerate() {
            t.push_row(vec![Cell::Int(i as i64), Cell::Real(x)]).unwrap();
        }
        let back = ReportTable::from_csv("", &t.to_csv().unwrap()).unwrap();
        prop_assert_eq!(back, t);
    }

    #[test]
    fn distinct_indices_give_distinct_streams(
        seed in any::<u64>(),
        a in (any::<u32>(), any::<u32>()),
        b in (any::<u32>(), any::<u32>()),
    ) {
        prop_assume!(a != b);
        prop_assert_ne!(derive_stream_seed(seed, a.0, a.1), derive_stream_seed(seed, b.0, b.1));
    }
}
