//! Linear displacement-model identification.
//!
//! Each axis is an independent two-parameter problem `d = q1·tv + q0`.
//! `fit_pso` searches for the line with the highest R² using a
//! constriction-coefficient particle swarm; `fit_ols` gives the exact
//! least-squares line and serves as the reference.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::motion_model::{AxisLine, DisplacementModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("need at least 2 data points, got {0}")]
    TooFewPoints(usize),
    #[error("displacement has zero variance; R² is undefined")]
    DegenerateVariance,
    #[error("all tidal volumes are equal; the least-squares design is singular")]
    SingularDesign,
    #[error("non-finite value in data at index {0}")]
    NonFinite(usize),
    #[error("invalid PSO configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("tidal volume and displacement lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
}

/// One `(tidal volume, displacement)` observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinePoint {
    pub tv: f64,
    pub d: f64,
}

impl LinePoint {
    pub fn new(tv: f64, d: f64) -> Self {
        Self { tv, d }
    }
}

/// Pair two equal-length series.
pub fn pair(tv: &[f64], d: &[f64]) -> Result<Vec<LinePoint>, FitError> {
    if tv.len() != d.len() {
        return Err(FitError::LengthMismatch(tv.len(), d.len()));
    }
    Ok(tv.iter().zip(d).map(|(&tv, &d)| LinePoint { tv, d }).collect())
}

fn check(data: &[LinePoint]) -> Result<(), FitError> {
    if data.len() < 2 {
        return Err(FitError::TooFewPoints(data.len()));
    }
    if let Some(i) = data.iter().position(|p| !p.tv.is_finite() || !p.d.is_finite()) {
        return Err(FitError::NonFinite(i));
    }
    Ok(())
}

fn total_sum_of_squares(data: &[LinePoint]) -> f64 {
    let mean = data.iter().map(|p| p.d).sum::<f64>() / data.len() as f64;
    data.iter().map(|p| (p.d - mean).powi(2)).sum()
}

fn residual_sum_of_squares(q1: f64, q0: f64, data: &[LinePoint]) -> f64 {
    data.iter().map(|p| (p.d - (q1 * p.tv + q0)).powi(2)).sum()
}

/// Coefficient of determination of the line `(q1, q0)` on `data`.
pub fn r_squared(params: (f64, f64), data: &[LinePoint]) -> Result<f64, FitError> {
    check(data)?;
    let ss_tot = total_sum_of_squares(data);
    if ss_tot == 0.0 {
        return Err(FitError::DegenerateVariance);
    }
    Ok(1.0 - residual_sum_of_squares(params.0, params.1, data) / ss_tot)
}

/// Ordinary least-squares line, returned as `(q1, q0)`.
pub fn fit_ols(data: &[LinePoint]) -> Result<(f64, f64), FitError> {
    check(data)?;
    let n = data.len() as f64;
    let mx = data.iter().map(|p| p.tv).sum::<f64>() / n;
    let my = data.iter().map(|p| p.d).sum::<f64>() / n;
    let sxx: f64 = data.iter().map(|p| (p.tv - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(FitError::SingularDesign);
    }
    let sxy: f64 = data.iter().map(|p| (p.tv - mx) * (p.d - my)).sum();
    let q1 = sxy / sxx;
    Ok((q1, my - q1 * mx))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsoConfig {
    pub population: usize,
    pub max_iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    /// `[(q1_lo, q1_hi), (q0_lo, q0_hi)]`. When absent, derived from the data.
    pub bounds: Option<[(f64, f64); 2]>,
    pub seed: u64,
    /// Stop once the best fitness has improved by less than `stall_tolerance`
    /// for this many consecutive iterations.
    pub stall_iterations: usize,
    pub stall_tolerance: f64,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self {
            population: 24,
            max_iterations: 2000,
            inertia: 0.729,
            cognitive: 1.494,
            social: 1.494,
            bounds: None,
            seed: 0,
            stall_iterations: 200,
            stall_tolerance: 1e-12,
        }
    }
}

impl PsoConfig {
    pub fn validate(&self) -> Result<(), FitError> {
        if self.population < 2 {
            return Err(FitError::InvalidConfig("population must be at least 2"));
        }
        if self.max_iterations == 0 {
            return Err(FitError::InvalidConfig("max_iterations must be at least 1"));
        }
        if ![self.inertia, self.cognitive, self.social].iter().all(|v| v.is_finite() && *v >= 0.0) {
            return Err(FitError::InvalidConfig("inertia, cognitive and social must be finite and non-negative"));
        }
        if let Some(bounds) = self.bounds {
            if !bounds.iter().all(|(lo, hi)| lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(FitError::InvalidConfig("bounds must be finite with lo < hi"));
            }
        }
        Ok(())
    }
}

/// Default search box: ten times the least-squares slope either side of zero,
/// and ±20 mm for the intercept.
pub fn default_bounds(data: &[LinePoint]) -> [(f64, f64); 2] {
    let q1 = match fit_ols(data) {
        Ok((q1, _)) if q1 != 0.0 => 10.0 * q1.abs(),
        _ => 1.0,
    };
    [(-q1, q1), (-20.0, 20.0)]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub q1: f64,
    pub q0: f64,
    pub r2: f64,
    pub iterations_used: usize,
    /// Best fitness after each iteration (index 0 is the initial swarm).
    pub history: Vec<f64>,
}

impl FitResult {
    pub fn line(&self) -> AxisLine {
        AxisLine::new(self.q1, self.q0)
    }
}

/// Particle swarm fit with the default execution policy.
pub fn fit_pso(data: &[LinePoint], cfg: &PsoConfig) -> Result<FitResult, FitError> {
    fit_pso_with(data, cfg, Execution::default())
}

pub fn fit_pso_with(data: &[LinePoint], cfg: &PsoConfig, exec: Execution) -> Result<FitResult, FitError> {
    check(data)?;
    cfg.validate()?;
    let ss_tot = total_sum_of_squares(data);
    if ss_tot == 0.0 {
        return Err(FitError::DegenerateVariance);
    }
    let bounds = cfg.bounds.unwrap_or_else(|| default_bounds(data));
    let fitness = |x: &[f64; 2]| 1.0 - residual_sum_of_squares(x[0], x[1], data) / ss_tot;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.population;
    let mut pos: Vec<[f64; 2]> = (0..n)
        .map(|_| [rng.gen_range(bounds[0].0..=bounds[0].1), rng.gen_range(bounds[1].0..=bounds[1].1)])
        .collect();
    let mut vel: Vec<[f64; 2]> = (0..n)
        .map(|_| {
            let s0 = 0.1 * (bounds[0].1 - bounds[0].0);
            let s1 = 0.1 * (bounds[1].1 - bounds[1].0);
            [rng.gen_range(-s0..=s0), rng.gen_range(-s1..=s1)]
        })
        .collect();

    let mut best_pos = pos.clone();
    let mut best_fit = exec.map_slice(&pos, fitness);
    let mut g = argmax(&best_fit);
    let mut g_pos = best_pos[g];
    let mut g_fit = best_fit[g];
    let mut history = Vec::with_capacity(cfg.max_iterations + 1);
    history.push(g_fit);

    let mut stall = 0;
    let mut iterations = 0;
    while iterations < cfg.max_iterations {
        iterations += 1;
        for i in 0..n {
            for d in 0..2 {
                let r1: f64 = rng.gen();
                let r2: f64 = rng.gen();
                let v = cfg.inertia * vel[i][d]
                    + cfg.cognitive * r1 * (best_pos[i][d] - pos[i][d])
                    + cfg.social * r2 * (g_pos[d] - pos[i][d]);
                let x = pos[i][d] + v;
                let (lo, hi) = bounds[d];
                if x < lo || x > hi {
                    pos[i][d] = x.clamp(lo, hi);
                    vel[i][d] = 0.0;
                } else {
                    pos[i][d] = x;
                    vel[i][d] = v;
                }
            }
        }
        let fits = exec.map_slice(&pos, fitness);
        for i in 0..n {
            if fits[i] > best_fit[i] {
                best_fit[i] = fits[i];
                best_pos[i] = pos[i];
            }
        }
        g = argmax(&best_fit);
        let improvement = best_fit[g] - g_fit;
        if best_fit[g] > g_fit {
            g_fit = best_fit[g];
            g_pos = best_pos[g];
        }
        history.push(g_fit);

        stall = if improvement < cfg.stall_tolerance { stall + 1 } else { 0 };
        if stall >= cfg.stall_iterations {
            break;
        }
    }

    Ok(FitResult { q1: g_pos[0], q0: g_pos[1], r2: g_fit, iterations_used: iterations, history })
}

/// Index of the largest value; the first one wins ties.
fn argmax(v: &[f64]) -> usize {
    v.iter().enumerate().fold(0, |best, (i, x)| if *x > v[best] { i } else { best })
}

/// Per-axis fits for all three displacement directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFit {
    pub ap: FitResult,
    pub si: FitResult,
    pub lr: FitResult,
}

impl ModelFit {
    pub fn model(&self) -> DisplacementModel {
        DisplacementModel { ap: self.ap.line(), si: self.si.line(), lr: self.lr.line() }
    }
}

/// Fit AP, SI and LR independently against the same tidal-volume series.
pub fn fit_model(tv: &[f64], axes: [&[f64]; 3], cfg: &PsoConfig, exec: Execution) -> Result<ModelFit, FitError> {
    let mut fits = Vec::with_capacity(3);
    for axis in axes {
        fits.push(fit_pso_with(&pair(tv, axis)?, cfg, exec)?);
    }
    let lr = fits.pop().unwrap();
    let si = fits.pop().unwrap();
    let ap = fits.pop().unwrap();
    Ok(ModelFit { ap, si, lr })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(q1: f64, q0: f64, n: usize) -> Vec<LinePoint> {
        (0..n).map(|i| i as f64 * 5.0).map(|tv| LinePoint::new(tv, q1 * tv + q0)).collect()
    }

    #[test]
    fn exact_data_has_unit_r2() {
        let data = line(0.008, 1.5, 50);
        assert_eq!(r_squared((0.008, 1.5), &data).unwrap(), 1.0);
    }

    #[test]
    fn mean_predictor_has_zero_r2() {
        let data = line(0.008, 1.5, 50);
        let mean = data.iter().map(|p| p.d).sum::<f64>() / 50.0;
        assert!(r_squared((0.0, mean), &data).unwrap().abs() < 1e-12);
    }

    #[test]
    fn ols_two_points_interpolate() {
        let data = [LinePoint::new(1.0, 3.0), LinePoint::new(3.0, 7.0)];
        let (q1, q0) = fit_ols(&data).unwrap();
        assert!((q1 - 2.0).abs() < 1e-12 && (q0 - 1.0).abs() < 1e-12);
        assert!((r_squared((q1, q0), &data).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ols_zero_covariance_has_zero_slope() {
        let data = [
            LinePoint::new(-1.0, 1.0),
            LinePoint::new(1.0, 1.0),
            LinePoint::new(-1.0, -1.0),
            LinePoint::new(1.0, -1.0),
        ];
        assert_eq!(fit_ols(&data).unwrap().0, 0.0);
    }

    #[test]
    fn error_paths() {
        assert_eq!(r_squared((1.0, 0.0), &[LinePoint::new(0.0, 1.0)]), Err(FitError::TooFewPoints(1)));
        let flat = [LinePoint::new(0.0, 2.0), LinePoint::new(1.0, 2.0)];
        assert_eq!(r_squared((1.0, 0.0), &flat), Err(FitError::DegenerateVariance));
        let vertical = [LinePoint::new(1.0, 2.0), LinePoint::new(1.0, 3.0)];
        assert_eq!(fit_ols(&vertical), Err(FitError::SingularDesign));
        let bad = PsoConfig { population: 1, ..Default::default() };
        assert!(matches!(fit_pso(&line(1.0, 0.0, 5), &bad), Err(FitError::InvalidConfig(_))));
    }

    #[test]
    fn pso_recovers_noiseless_line() {
        let data = line(0.008, 1.5, 100);
        let fit = fit_pso(&data, &PsoConfig::default()).unwrap();
        assert!(fit.r2 >= 1.0 - 1e-6, "{}", fit.r2);
    }

    #[test]
    fn pso_is_deterministic_across_policies() {
        let data = line(-0.004, 0.2, 60);
        let cfg = PsoConfig { seed: 7, ..Default::default() };
        let a = fit_pso_with(&data, &cfg, Execution::Sequential).unwrap();
        let b = fit_pso_with(&data, &cfg, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn default_bounds_fallback() {
        let data = [
            LinePoint::new(-1.0, 1.0),
            LinePoint::new(1.0, 1.0),
            LinePoint::new(-1.0, -1.0),
            LinePoint::new(1.0, -1.0),
        ];
        assert_eq!(default_bounds(&data), [(-1.0, 1.0), (-20.0, 20.0)]);
    }
}
