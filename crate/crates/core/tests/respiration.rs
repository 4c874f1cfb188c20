use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spinecomp::respiration::{LITERATURE_B, LITERATURE_C, TidalVolumeSeries};
use spinecomp::{flow_velocity, solve_flow_coefficients, tidal_volume, FlowCoefficients, VentilatorConfig};

fn solved(cfg: &VentilatorConfig) -> FlowCoefficients {
    solve_flow_coefficients(cfg, 1e-10).unwrap().coefficients
}

/// Trapezoidal integral of the flow at 1 kHz, with the inhale/exhale
/// switch inserted as an extra node so the step is not smeared.
fn quadrature(t: f64, c: &FlowCoefficients) -> f64 {
    quadrature_step(t, c, 1e-3)
}

fn quadrature_step(t: f64, c: &FlowCoefficients, h: f64) -> f64 {
    let mut nodes: Vec<f64> = (0..=((t / h).floor() as usize)).map(|i| i as f64 * h).collect();
    let mut k = 0.0;
    while k * c.period <= t {
        for edge in [k * c.period, k * c.period + c.t_inhale] {
            if edge > 0.0 && edge < t {
                nodes.push(edge);
            }
        }
        k += 1.0;
    }
    nodes.push(t);
    nodes.sort_by(f64::total_cmp);
    nodes.dedup();
    nodes
        .windows(2)
        .map(|w| {
            let eps = 1e-12;
            0.5 * (w[1] - w[0]) * (flow_velocity(w[0] + eps, c) + flow_velocity(w[1] - eps, c))
        })
        .sum()
}

#[test]
fn closed_form_matches_quadrature() {
    let c = solved(&VentilatorConfig::default());
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let t = rng.gen_range(0.0..c.period);
        worst = worst.max((quadrature(t, &c) - tidal_volume(t, &c)).abs());
    }
    assert!(worst < 1e-4, "worst quadrature gap {worst} ml");
}

#[test]
fn quadrature_gap_is_second_order() {
    // Over several periods the 1 kHz oracle drifts by its own h^2 error;
    // halving the step must quarter the gap if the closed form is exact.
    let c = solved(&VentilatorConfig::default());
    for t in [2.5, 7.3, 14.2] {
        let coarse = quadrature_step(t, &c, 1e-3) - tidal_volume(t, &c);
        let fine = quadrature_step(t, &c, 5e-4) - tidal_volume(t, &c);
        let ratio = coarse / fine;
        assert!((ratio - 4.0).abs() < 0.05, "t={t} ratio {ratio}");
        assert!((quadrature_step(t, &c, 1e-4) - tidal_volume(t, &c)).abs() < 2e-6);
    }
}

#[test]
fn default_setting_landmarks() {
    let c = solved(&VentilatorConfig::default());
    assert_eq!(c.a, 300.0);
    assert_eq!(c.a * c.t_inhale, 500.0);
    assert!(tidal_volume(0.0, &c).abs() < 1e-12);
    assert!((tidal_volume(0.5, &c) - 150.0).abs() < 1e-9);
    assert!((tidal_volume(5.0 / 3.0, &c) - 500.0).abs() < 1e-6);
    assert!(tidal_volume(c.period, &c).abs() < 1e-6);
    assert!(c.b > 0.0 && c.b < 1.0);
}

#[test]
fn literature_constants_differ_from_solved() {
    let cfg = VentilatorConfig::default();
    let c = solved(&cfg);
    let lit = FlowCoefficients::with_exhale(&cfg, LITERATURE_B, LITERATURE_C);
    let r = lit.residuals();
    assert!(r[0].abs() > 1.0, "literature residual {r:?}");
    assert!((c.b - LITERATURE_B).abs() / LITERATURE_B > 0.01);
}

#[test]
fn sampled_series_is_bounded() {
    let cfg = VentilatorConfig::default();
    let c = solved(&cfg);
    let s = TidalVolumeSeries::sample(&c, 30.0, 8.0);
    assert_eq!(s.timestamps.len(), 241);
    assert!(s.values.iter().all(|v| *v >= 0.0 && *v <= cfg.tv_max * 1.05));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn periodic_and_consistent(
        tv_max in 200.0..900.0f64,
        freq in 8.0..20.0f64,
        ratio_out in 1.8..3.0f64,
        t in 0.0..30.0f64,
    ) {
        let cfg = VentilatorConfig { tv_max, resp_freq: freq, ratio_in: 1.0, ratio_out, ..VentilatorConfig::default() };
        let sol = solve_flow_coefficients(&cfg, 1e-8).unwrap();
        let c = sol.coefficients;
        prop_assert!(sol.residuals.iter().all(|r| r.abs() < 1e-8));
        prop_assert!((c.a * c.t_inhale - tv_max).abs() < 1e-9 * tv_max);
        prop_assert!((tidal_volume(t + c.period, &c) - tidal_volume(t, &c)).abs() < 1e-6);
        prop_assert!(tidal_volume(t, &c) >= 0.0);
        let phase = t.rem_euclid(c.period);
        if phase > 1e-6 && (phase - c.t_inhale).abs() > 1e-6 && c.period - phase > 1e-6 {
            prop_assert!((flow_velocity(t, &c) - flow_velocity(t + 3.0 * c.period, &c)).abs() < 1e-6);
        }
    }

    #[test]
    fn no_root_below_peak_factor_threshold(ratio_out in 1.0..1.6f64) {
        // With exhale peak factor 2 a root needs ratio_in/ratio_out <= 2·0.2984.
        let cfg = VentilatorConfig { ratio_in: 1.0, ratio_out, ..VentilatorConfig::default() };
        prop_assert!(solve_flow_coefficients(&cfg, 1e-8).is_err());
    }
}
