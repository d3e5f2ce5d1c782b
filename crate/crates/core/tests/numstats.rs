mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stylecast::numstats::special::{betainc, f_sf, t_two_sided};
use stylecast::numstats::{f_test, fit_ar, fit_ar_from, haversine, paired_ttest, spearman, Exog, EARTH_RADIUS_KM};

#[test]
fn exact_ar1_recursion() {
    let mut y = vec![1.0];
    for _ in 0..40 {
        y.push(0.5 * y[y.len() - 1]);
    }
    let fit = fit_ar(&y, 1, None).unwrap();
    assert!((fit.own[0] - 0.5).abs() < 1e-9);
    assert!(fit.intercept.abs() < 1e-9);
    assert!(fit.rss < 1e-9);
}

#[test]
fn own_lags_as_exog_do_not_raise_rss() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let y = common::normal_series(&mut rng, 120, 1.0);
    let restricted = fit_ar_from(&y, 3, None, 3).unwrap();
    let exog = Exog {
        series: &y,
        min_lag: 1,
        max_lag: 3,
    };
    let extended = fit_ar_from(&y, 3, Some(exog), 3).unwrap();
    assert!(extended.rss <= restricted.rss * (1.0 + 1e-9));
}

#[test]
fn f_test_reference_points() {
    let same = f_test(2.0, 2.0, 3, 50);
    assert_eq!((same.f, same.p_value), (0.0, 1.0));
    // F(1, inf) is chi-square(1): P(F > 1) = P(|Z| > 1)
    let chi = f_sf(1.0, 1.0, 1e7);
    assert!((chi - 0.317_310_507_862_914_1).abs() < 1e-5, "{chi}");
    let crit = f_sf(4.96, 1.0, 10.0);
    assert!((crit - 0.050).abs() < 5e-4, "{crit}");
}

#[test]
fn incomplete_beta_matches_quadrature() {
    let mut worst = 0.0f64;
    let grid = [(0.5, 0.5, 0.3), (1.0, 1.0, 0.7), (2.0, 3.0, 0.4), (5.0, 2.0, 0.9), (0.7, 4.0, 0.05)];
    let xs = [0.1f64, 0.35, 0.6, 0.85];
    for &(a, b, _) in &grid {
        // Beta kernel after x = sin^2(theta), theta = psi^2, which smooths the
        // x^(a - 1) endpoint behavior
        let kernel = |psi: f64| {
            let (s, c) = (psi * psi).sin_cos();
            4.0 * psi * s.powf(2.0 * a - 1.0) * c.powf(2.0 * b - 1.0)
        };
        let simpson = |hi: f64| {
            let n = 200_000;
            let h = hi / n as f64;
            let mut acc = kernel(0.0) + kernel(hi);
            for i in 1..n {
                acc += kernel(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            acc * h / 3.0
        };
        let total = simpson(std::f64::consts::FRAC_PI_2.sqrt());
        for &x in &xs {
            let oracle = simpson(x.sqrt().asin().sqrt()) / total;
            worst = worst.max((betainc(a, b, x) - oracle).abs());
        }
    }
    assert!(worst < 1e-8, "worst {worst:e}");
}

#[test]
fn spearman_examples() {
    let x: Vec<f64> = (1..=9).map(|v| v as f64).collect();
    let cubes: Vec<f64> = x.iter().map(|v| v * v * v).collect();
    assert_eq!(spearman(&x, &cubes).unwrap(), Some(1.0));
    let rev: Vec<f64> = x.iter().rev().copied().collect();
    assert_eq!(spearman(&x, &rev).unwrap(), Some(-1.0));
    // mid-ranks [1, 2.5, 2.5, 4] vs [1, 3, 2, 4]: sxy = 4.5, sxx = 4.5, syy = 5
    let got = spearman(&[1.0, 2.0, 2.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap().unwrap();
    assert!((got - 4.5 / (4.5f64 * 5.0).sqrt()).abs() < 1e-15);
    assert!(spearman(&[1.0, 2.0], &[1.0, 2.0]).is_err());
}

#[test]
fn paired_t_examples() {
    let a = [0.3, 0.1, 0.4, 0.2];
    let same = paired_ttest(&a, &a).unwrap();
    assert_eq!(same.p_value, 1.0);

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let noise = common::normal_series(&mut rng, 30, 0.01);
    let b: Vec<f64> = noise.iter().map(|e| 1.0 + e).collect();
    let zeros = vec![0.0; b.len()];
    let shifted = paired_ttest(&b, &zeros).unwrap();
    let df = (b.len() - 1) as f64;
    let kernel = |x: f64| (1.0 + x * x / df).powf(-(df + 1.0) / 2.0);
    let oracle = common::tail_integral(kernel, shifted.t.abs()) / common::tail_integral(kernel, 0.0);
    assert!(shifted.p_value < 1e-3);
    assert!((shifted.p_value - oracle).abs() < 1e-9);

    let c = [0.5, 0.2, 0.9, 0.4];
    let ab = paired_ttest(&a, &c).unwrap();
    let ba = paired_ttest(&c, &a).unwrap();
    assert_eq!(ab.t, -ba.t);
    assert_eq!(ab.p_value, ba.p_value);
}

#[test]
fn haversine_examples() {
    assert_eq!(haversine((48.85, 2.35), (48.85, 2.35)), 0.0);
    let half = haversine((0.0, 0.0), (0.0, 180.0));
    assert!((half - std::f64::consts::PI * EARTH_RADIUS_KM).abs() < 1e-6);
    assert!((half - 20015.1).abs() < 0.1);
    let (a, b) = ((40.71, -74.0), (35.68, 139.69));
    assert_eq!(haversine(a, b), haversine(b, a));
}

proptest! {
    #[test]
    fn f_p_values_bounded_and_monotone(f1 in 0.0f64..30.0, bump in 0.0f64..10.0, d1 in 1usize..10, d2 in 5usize..200) {
        let p1 = f_sf(f1, d1 as f64, d2 as f64);
        let p2 = f_sf(f1 + bump, d1 as f64, d2 as f64);
        prop_assert!((0.0..=1.0).contains(&p1));
        prop_assert!(p2 <= p1 + 1e-12);
    }

    #[test]
    fn t_p_values_bounded(t in -50.0f64..50.0, df in 1.0f64..300.0) {
        let p = t_two_sided(t, df);
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!((p - t_two_sided(-t, df)).abs() < 1e-15);
    }

    #[test]
    fn extra_regressors_never_raise_rss(seed in 0u64..500, order in 1usize..4, lag in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y = common::normal_series(&mut rng, 80, 1.0);
        let x = common::normal_series(&mut rng, 80, 1.0);
        let start = order.max(lag);
        let r = fit_ar_from(&y, order, None, start).unwrap();
        let u = fit_ar_from(&y, order, Some(Exog { series: &x, min_lag: 1, max_lag: lag }), start).unwrap();
        prop_assert!(u.rss <= r.rss * (1.0 + 1e-9) + 1e-12);
    }
}
