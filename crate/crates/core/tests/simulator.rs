use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spinecomp::simulator::{force_plant, EndReason, FaultInjection, Layer, SUCCESS_RESIDUAL_MAX};
use spinecomp::{run_batch, run_trial, BoneModel, Execution, Mode, TrialConfig};

fn cfg(mode: Mode, seed: u64) -> TrialConfig {
    TrialConfig { mode, seed, ..TrialConfig::default() }
}

#[test]
fn identical_config_is_bit_identical() {
    for mode in Mode::ALL {
        let c = cfg(mode, 17);
        assert_eq!(run_trial(&c).unwrap(), run_trial(&c).unwrap());
    }
}

#[test]
fn pinned_stationary_seed() {
    let r = run_trial(&cfg(Mode::Stationary, 42)).unwrap();
    assert_eq!(r.end_reason, EndReason::Stop);
    assert!(r.success);
    assert!(r.residual_thickness > 0.0 && r.residual_thickness <= SUCCESS_RESIDUAL_MAX);
    assert!((r.residual_thickness - 1.3347).abs() < 1e-3, "residual {}", r.residual_thickness);
}

#[test]
fn breakthrough_depth_is_total_thickness() {
    let bone = BoneModel { noise_floor: 0.0, cancellous_fluctuation: 0.0, cortical_fluctuation: 0.0, ..BoneModel::default() };
    let c = TrialConfig { bone: bone.clone(), recognizer_enabled: false, ..cfg(Mode::Stationary, 1) };
    let r = run_trial(&c).unwrap();
    assert_eq!(r.end_reason, EndReason::Breakthrough);
    let total = bone.total_thickness();
    assert!(r.stop_depth >= total && r.stop_depth - total <= c.tick * c.feed_rate, "{}", r.stop_depth);
}

#[test]
fn geometry_is_conserved_on_inner_stops() {
    for mode in [Mode::Stationary, Mode::MovingCompensated] {
        for seed in 0..10 {
            let r = run_trial(&cfg(mode, seed)).unwrap();
            let bone = BoneModel::default();
            if r.end_reason == EndReason::Stop && bone.layer_at(r.stop_depth) == Layer::InnerCortical {
                assert!((r.stop_depth + r.residual_thickness - bone.total_thickness()).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn compensation_removes_most_relative_feed_variance() {
    let mean_var = |mode| {
        (0..5)
            .map(|seed| {
                let c = TrialConfig {
                    monitor_enabled: false,
                    recognizer_enabled: false,
                    record_trace: false,
                    max_duration: 30.0,
                    ..cfg(mode, seed)
                };
                run_trial(&c).unwrap().relative_feed_variance
            })
            .sum::<f64>()
            / 5.0
    };
    let (b, c) = (mean_var(Mode::MovingUncompensated), mean_var(Mode::MovingCompensated));
    assert!(c < 0.25 * b, "compensated {c} vs uncompensated {b}");
}

#[test]
fn plant_ratio_matches_hardness() {
    let bone = BoneModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mean = |depth: f64, rng: &mut ChaCha8Rng| (0..10_000).map(|_| force_plant(0.5, depth, &bone, 12_000.0, rng)).sum::<f64>() / 1e4;
    let cortical = mean(1.5, &mut rng);
    let cancellous = mean(10.0, &mut rng);
    let ratio = cortical / cancellous;
    let expected = bone.cortical_hardness / bone.cancellous_hardness;
    assert!((ratio / expected - 1.0).abs() < 0.02, "ratio {ratio} vs {expected}");
}

#[test]
fn injected_faults_abort_within_one_tick() {
    let at = 2.0;
    let position = TrialConfig { fault: Some(FaultInjection { at, position_offset: 1.3, force_override: None }), ..cfg(Mode::MovingCompensated, 3) };
    let r = run_trial(&position).unwrap();
    assert_eq!(r.end_reason, EndReason::PositionAbort);
    assert!(r.end_time - at <= position.tick + 1e-12);

    let force = TrialConfig { fault: Some(FaultInjection { at, position_offset: 0.0, force_override: Some(11.0) }), ..cfg(Mode::Stationary, 3) };
    let r = run_trial(&force).unwrap();
    assert_eq!(r.end_reason, EndReason::ForceAbort);
    assert!(r.end_time - at <= force.tick + 1e-12);
    assert!(!r.success);
}

#[test]
fn batch_of_one_is_the_trial() {
    let c = TrialConfig { record_trace: false, ..cfg(Mode::MovingCompensated, 9) };
    let b = run_batch(1, &c, Execution::Sequential).unwrap();
    let t = run_trial(&c).unwrap();
    assert_eq!(b.trials, vec![t.clone()]);
    assert_eq!(b.success_rate, if t.success { 1.0 } else { 0.0 });
    assert_eq!(b.median_f_out, t.f_out);
}

#[test]
fn batches_are_policy_free_and_repeatable() {
    let c = TrialConfig { record_trace: false, ..cfg(Mode::MovingCompensated, 100) };
    let a = run_batch(8, &c, Execution::Sequential).unwrap();
    let b = run_batch(8, &c, Execution::Parallel).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, run_batch(8, &c, Execution::Parallel).unwrap());
    assert!(a.trials.iter().enumerate().all(|(i, t)| t.seed == 100 + i as u64));
}

#[test]
fn compensated_beats_uncompensated() {
    let rate = |mode| run_batch(30, &TrialConfig { record_trace: false, ..cfg(mode, 0) }, Execution::Parallel).unwrap().success_rate;
    assert!(rate(Mode::MovingCompensated) > rate(Mode::MovingUncompensated));
}
