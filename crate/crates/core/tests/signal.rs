use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use spinecomp::signal::{
    band_reconstruct, default_delta, denoise, denoise_metrics, dwt_decompose, rank_scores, reconstruct_all, select_basis, Band,
    WaveletBasis, BREATHING_BANDS, DEFAULT_LEVELS, SHIPPED_BASES,
};
use spinecomp::{solve_flow_coefficients, tidal_volume, Execution, VentilatorConfig};

fn random_signal(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = Uniform::new(-1.0, 1.0);
    (0..n).map(|_| u.sample(&mut rng)).collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// 30 s of AP-like displacement at 8 Hz with the matching tidal volume.
fn breathing_trace(noise_sd: f64, seed: u64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let c = solve_flow_coefficients(&VentilatorConfig::default(), 1e-10).unwrap().coefficients;
    let tv: Vec<f64> = (0..240).map(|i| tidal_volume(i as f64 / 8.0, &c)).collect();
    let clean: Vec<f64> = tv.iter().map(|v| 0.008 * v + 0.5).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise_sd.max(1e-300)).unwrap();
    let raw = clean.iter().map(|d| d + if noise_sd > 0.0 { normal.sample(&mut rng) } else { 0.0 }).collect();
    (tv, clean, raw)
}

#[test]
fn perfect_reconstruction_all_bases() {
    for basis in WaveletBasis::shipped() {
        let tol = if basis.orthogonal { 1e-8 } else { 1e-6 };
        for (i, n) in [64usize, 100, 240].into_iter().cycle().take(100).enumerate() {
            let x = random_signal(n, i as u64);
            let dec = dwt_decompose(&x, &basis, DEFAULT_LEVELS).unwrap();
            let err = max_abs_diff(&reconstruct_all(&dec), &x);
            assert!(err < tol, "{} n={n}: {err}", basis.name);
        }
    }
}

#[test]
fn constant_signal_has_no_detail() {
    for basis in WaveletBasis::shipped().into_iter().filter(|b| b.orthogonal) {
        let dec = dwt_decompose(&[3.7; 240], &basis, DEFAULT_LEVELS).unwrap();
        for d in &dec.details {
            assert!(d.iter().all(|c| c.abs() < 1e-9), "{}", basis.name);
        }
    }
}

#[test]
fn breathing_sine_sits_in_d4() {
    let x: Vec<f64> = (0..240).map(|i| (2.0 * std::f64::consts::PI * 0.33 * i as f64 / 8.0).sin()).collect();
    for basis in WaveletBasis::shipped() {
        let dec = dwt_decompose(&x, &basis, DEFAULT_LEVELS).unwrap();
        let per_band: Vec<f64> =
            (1..=DEFAULT_LEVELS).map(|l| energy(&band_reconstruct(&dec, &[Band::Detail(l)]).unwrap())).collect();
        let share = per_band[3] / per_band.iter().sum::<f64>();
        assert!(share >= 0.7, "{}: d4 share {share}", basis.name);
    }
}

#[test]
fn breathing_bands_are_additive() {
    let (_, _, raw) = breathing_trace(0.05, 3);
    for basis in WaveletBasis::shipped() {
        let dec = dwt_decompose(&raw, &basis, DEFAULT_LEVELS).unwrap();
        let joint = band_reconstruct(&dec, &BREATHING_BANDS).unwrap();
        let mut sum = vec![0.0; raw.len()];
        for b in BREATHING_BANDS {
            for (s, v) in sum.iter_mut().zip(band_reconstruct(&dec, &[b]).unwrap()) {
                *s += v;
            }
        }
        assert!(max_abs_diff(&joint, &sum) < 1e-10);
        assert_eq!(joint, denoise(&raw, &basis).unwrap());
        assert!(band_reconstruct(&dec, &[]).unwrap().iter().all(|v| *v == 0.0));
    }
}

#[test]
fn nsr_tracks_injected_noise() {
    let sigma = 0.1;
    let mut ratios = Vec::new();
    for seed in 0..50 {
        let (tv, clean, raw) = breathing_trace(sigma, seed);
        let mean = clean.iter().sum::<f64>() / clean.len() as f64;
        let power = clean.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / clean.len() as f64;
        let m = denoise_metrics(&raw, &clean, &tv, default_delta(&tv)).unwrap();
        ratios.push(m.nsr / (sigma * sigma / power));
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    assert!((mean - 1.0).abs() < 0.2, "mean NSR ratio {mean}");
}

#[test]
fn selection_matches_brute_force() {
    let candidates = WaveletBasis::shipped();
    for seed in 0..10 {
        let (tv, _, raw) = breathing_trace(0.08, 100 + seed);
        let report = select_basis(&raw, &tv, &candidates, [1.0 / 3.0; 3], Execution::Sequential).unwrap();

        let delta = 0.02 * tv.iter().copied().fold(0.0, f64::max);
        let z: Vec<[f64; 3]> = candidates
            .iter()
            .map(|b| denoise_metrics(&raw, &denoise(&raw, b).unwrap(), &tv, delta).unwrap().as_array())
            .collect();
        let mut best = (f64::INFINITY, 0);
        for (i, row) in z.iter().enumerate() {
            let mut score = 0.0;
            for col in 0..3 {
                let lo = z.iter().map(|r| r[col]).fold(f64::INFINITY, f64::min);
                let hi = z.iter().map(|r| r[col]).fold(f64::NEG_INFINITY, f64::max);
                score += if hi > lo { (row[col] - lo) / (hi - lo) } else { 0.0 } / 3.0;
            }
            if score < best.0 {
                best = (score, i);
            }
        }
        assert_eq!(report.best, best.1, "seed {seed}");
        assert_eq!(report.best_name(), SHIPPED_BASES[best.1]);

        let par = select_basis(&raw, &tv, &candidates, [1.0 / 3.0; 3], Execution::Parallel).unwrap();
        assert_eq!(par, report);
    }
}

proptest! {
    #[test]
    fn reconstruction_is_linear(seed in 0u64..1000, a in -3.0..3.0f64, b in -3.0..3.0f64, basis in 0usize..4) {
        let basis = WaveletBasis::by_name(SHIPPED_BASES[basis]).unwrap();
        let x = random_signal(100, seed);
        let y = random_signal(100, seed + 7919);
        let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let d = |s: &[f64]| band_reconstruct(&dwt_decompose(s, &basis, 6).unwrap(), &BREATHING_BANDS).unwrap();
        let (dx, dy, dm) = (d(&x), d(&y), d(&mix));
        for i in 0..100 {
            prop_assert!((dm[i] - (a * dx[i] + b * dy[i])).abs() < 1e-9);
        }
    }

    #[test]
    fn disjoint_bands_sum_to_whole(seed in 0u64..1000, mask in 0u8..128) {
        let basis = WaveletBasis::by_name("coif4").unwrap();
        let x = random_signal(240, seed);
        let dec = dwt_decompose(&x, &basis, 6).unwrap();
        let all: Vec<Band> = std::iter::once(Band::Approx).chain((1..=6).map(Band::Detail)).collect();
        let left: Vec<Band> = all.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, b)| *b).collect();
        let right: Vec<Band> = all.iter().filter(|b| !left.contains(b)).copied().collect();
        let l = band_reconstruct(&dec, &left).unwrap();
        let r = band_reconstruct(&dec, &right).unwrap();
        let whole = reconstruct_all(&dec);
        for i in 0..240 {
            prop_assert!((l[i] + r[i] - whole[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn ranking_ignores_column_scale(
        z in prop::collection::vec(prop::array::uniform3(0.0..5.0f64), 1..6),
        scale in prop::array::uniform3(0.01..100.0f64),
    ) {
        let scaled: Vec<[f64; 3]> = z.iter().map(|r| [r[0] * scale[0], r[1] * scale[1], r[2] * scale[2]]).collect();
        let (a, _, sa) = rank_scores(&z, [1.0 / 3.0; 3]);
        let (b, _, sb) = rank_scores(&scaled, [1.0 / 3.0; 3]);
        prop_assert!((sa[a] - sb[b]).abs() < 1e-9);
        prop_assert!((sa[b] - sa[a]).abs() < 1e-9);
    }
}
