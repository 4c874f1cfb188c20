use proptest::prelude::*;
use spinecomp::compensation::{AbortReason, MonitorVerdict};
use spinecomp::{monitor, segment_displacement, trapezoid_profile, DisplacementSample, MonitorConfig, MotionSegment};

/// Trapezoid rule on a uniform grid plus the two ramp corners.
fn integrate(seg: &MotionSegment, rate: f64) -> f64 {
    let n = (seg.duration * rate).round() as usize;
    let mut nodes: Vec<f64> = (0..=n).map(|i| seg.duration * i as f64 / n as f64).collect();
    nodes.extend([seg.ramp_time(), seg.duration - seg.ramp_time()]);
    nodes.sort_by(f64::total_cmp);
    nodes.windows(2).map(|w| 0.5 * (w[1] - w[0]) * (seg.velocity(w[0]) + seg.velocity(w[1]))).sum()
}

fn sinusoid(rate: f64, seconds: f64) -> Vec<DisplacementSample> {
    let w = 2.0 * std::f64::consts::PI * 0.2;
    (0..=(seconds * rate) as usize)
        .map(|i| {
            let t = i as f64 / rate;
            DisplacementSample { t, d_ap: 2.0 * (w * t).sin(), d_si: (w * t).cos(), d_lr: 0.0 }
        })
        .collect()
}

#[test]
fn sinusoid_segments_land_on_the_curve() {
    let series = sinusoid(64.0, 20.0);
    let plan = segment_displacement(&series, 0.125).unwrap();
    let mut pos = 0.0;
    let mut worst: f64 = 0.0;
    let w = 2.0 * std::f64::consts::PI * 0.2;
    for seg in &plan.ap {
        pos += seg.position(seg.duration);
        let end = seg.t_start + seg.duration;
        worst = worst.max((pos - 2.0 * (w * end).sin()).abs());
    }
    assert!(worst < 0.05, "endpoint error {worst}");
}

#[test]
fn constant_prediction_gives_idle_segments() {
    let series: Vec<DisplacementSample> = (0..65).map(|i| DisplacementSample { t: i as f64 / 64.0, d_ap: 1.5, d_si: -0.5, d_lr: 0.0 }).collect();
    let plan = segment_displacement(&series, 0.125).unwrap();
    for seg in plan.ap.iter().chain(&plan.si).chain(&plan.lr) {
        assert_eq!(seg.distance, 0.0);
        assert_eq!(seg.velocity(0.06), 0.0);
    }
}

#[test]
fn monitor_thresholds_are_strict() {
    let cfg = MonitorConfig::default();
    assert_eq!((cfg.h1, cfg.h2), (1.2, 10.0));
    assert_eq!(monitor(1.2, 10.0, &cfg), MonitorVerdict::Ok);
    assert_eq!(monitor(-1.3, 0.0, &cfg), MonitorVerdict::Abort(AbortReason::PositionDeviation));
    assert_eq!(monitor(1.3, 11.0, &cfg), MonitorVerdict::Abort(AbortReason::PositionDeviation));
    assert_eq!(monitor(0.0, 11.0, &cfg), MonitorVerdict::Abort(AbortReason::ForceLimit));
}

proptest! {
    #[test]
    fn profile_integrates_to_distance(d in -3.0..3.0f64, duration in 0.05..2.0f64) {
        let seg = trapezoid_profile(d, duration).unwrap();
        prop_assert!((integrate(&seg, 100_000.0) - d).abs() < 1e-9 + 1e-8 * d.abs());
        prop_assert!((seg.position(duration) - d).abs() < 1e-12);
        prop_assert_eq!(seg.velocity(0.0), 0.0);
        prop_assert_eq!(seg.velocity(duration), 0.0);
        prop_assert!(seg.ramp_time() <= 0.5 * duration + 1e-12);
    }

    #[test]
    fn position_is_continuous_inside(d in -3.0..3.0f64, duration in 0.05..2.0f64, u in 0.0..1.0f64) {
        let seg = trapezoid_profile(d, duration).unwrap();
        let t = u * duration;
        let h = 1e-7;
        prop_assert!((seg.position(t + h) - seg.position(t)).abs() <= seg.peak_velocity.abs() * h * 1.01 + 1e-15);
    }

    #[test]
    fn monitor_is_monotone(e in 0.0..3.0f64, f in 0.0..20.0f64, de in 0.0..1.0f64, df in 0.0..5.0f64) {
        let cfg = MonitorConfig::default();
        if monitor(e, f, &cfg) != MonitorVerdict::Ok {
            prop_assert!(monitor(e + de, f + df, &cfg) != MonitorVerdict::Ok);
        }
    }
}
