use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use spinecomp::fitting::{default_bounds, fit_model, fit_pso_with};
use spinecomp::{fit_ols, fit_pso, r_squared, Execution, LinePoint, PsoConfig};

fn noisy_line(seed: u64, n: usize, q1: f64, q0: f64, sd: f64) -> Vec<LinePoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sd).unwrap();
    (0..n)
        .map(|_| {
            let tv = rng.gen_range(0.0..500.0);
            LinePoint::new(tv, q1 * tv + q0 + noise.sample(&mut rng))
        })
        .collect()
}

#[test]
fn pso_tracks_least_squares_on_noisy_sets() {
    let cfg = PsoConfig::default();
    let close = (0..50u64)
        .filter(|&s| {
            let data = noisy_line(s, 200, 0.008, 0.5, 0.3);
            let ols = r_squared(fit_ols(&data).unwrap(), &data).unwrap();
            let pso = fit_pso(&data, &PsoConfig { seed: s, ..cfg.clone() }).unwrap();
            (pso.r2 - ols).abs() < 1e-3
        })
        .count();
    assert!(close >= 48, "{close}/50 within 1e-3");
}

#[test]
fn noiseless_data_is_recovered() {
    let data = noisy_line(1, 100, -0.004, 1.2, 1e-300);
    let cfg = PsoConfig { bounds: Some([(-0.04, 0.04), (-12.0, 12.0)]), ..PsoConfig::default() };
    let fit = fit_pso(&data, &cfg).unwrap();
    assert!(fit.r2 >= 1.0 - 1e-6, "r2 {}", fit.r2);
}

#[test]
fn three_axes_fit_independently() {
    let tv: Vec<f64> = (0..240).map(|i| 250.0 * (1.0 - (i as f64 * 0.26).cos())).collect();
    let ap: Vec<f64> = tv.iter().map(|v| 0.008 * v + 0.5).collect();
    let si: Vec<f64> = tv.iter().map(|v| 0.004 * v - 0.3).collect();
    let lr: Vec<f64> = tv.iter().map(|v| -0.002 * v + 0.1).collect();
    let fit = fit_model(&tv, [&ap, &si, &lr], &PsoConfig::default(), Execution::Parallel).unwrap();
    let m = fit.model();
    for (line, (q1, q0)) in [(m.ap, (0.008, 0.5)), (m.si, (0.004, -0.3)), (m.lr, (-0.002, 0.1))] {
        assert!((line.slope - q1).abs() < 1e-5 && (line.intercept - q0).abs() < 1e-3, "{line:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn least_squares_dominates(seed in 0u64..10_000, sd in 0.01..2.0f64) {
        let data = noisy_line(seed, 200, 0.006, -0.2, sd);
        let ols = r_squared(fit_ols(&data).unwrap(), &data).unwrap();
        let pso = fit_pso(&data, &PsoConfig { seed, max_iterations: 300, ..PsoConfig::default() }).unwrap();
        prop_assert!(ols >= pso.r2 - 1e-12);
    }

    #[test]
    fn history_is_monotone_and_within_bounds(seed in 0u64..10_000) {
        let data = noisy_line(seed, 80, 0.01, 0.0, 0.5);
        let cfg = PsoConfig { seed, max_iterations: 400, ..PsoConfig::default() };
        let fit = fit_pso(&data, &cfg).unwrap();
        prop_assert!(fit.history.windows(2).all(|w| w[1] >= w[0]));
        prop_assert_eq!(fit.history.len(), fit.iterations_used + 1);
        let [(l1, h1), (l0, h0)] = default_bounds(&data);
        prop_assert!(fit.q1 >= l1 && fit.q1 <= h1 && fit.q0 >= l0 && fit.q0 <= h0);
    }

    #[test]
    fn deterministic_and_policy_free(seed in 0u64..10_000) {
        let data = noisy_line(seed, 60, 0.01, 0.3, 0.2);
        let cfg = PsoConfig { seed, max_iterations: 200, ..PsoConfig::default() };
        let a = fit_pso_with(&data, &cfg, Execution::Sequential).unwrap();
        let b = fit_pso_with(&data, &cfg, Execution::Parallel).unwrap();
        let c = fit_pso_with(&data, &cfg, Execution::Sequential).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(&a, &c);
    }

    #[test]
    fn order_does_not_matter(seed in 0u64..10_000) {
        let data = noisy_line(seed, 120, 0.007, 0.1, 0.3);
        let mut shuffled = data.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0xabcd));
        let cfg = PsoConfig { seed, ..PsoConfig::default() };
        let (a, b) = (fit_pso(&data, &cfg).unwrap(), fit_pso(&shuffled, &cfg).unwrap());
        prop_assert!((a.r2 - b.r2).abs() < 1e-9);
        prop_assert!((a.q1 - b.q1).abs() < 1e-6 && (a.q0 - b.q0).abs() < 1e-4);
        let (p, q) = (r_squared((a.q1, a.q0), &data).unwrap(), r_squared((a.q1, a.q0), &shuffled).unwrap());
        prop_assert!((p - q).abs() < 1e-12);
    }
}
