//! De-noising quality metrics.
//!
//! `nsr` is the power of the removed component over the power of the kept
//! component. Both powers are taken about their means, since the breathing
//! bands carry no DC. `w_max` and `w_mean` summarise the spread of
//! de-noised displacement among samples that share (nearly) the same tidal
//! volume; a good de-noiser makes displacement a single-valued function of
//! tidal volume.

use serde::{Deserialize, Serialize};

use super::SignalError;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DenoiseMetrics {
    pub nsr: f64,
    /// Largest spread over the probe volumes (mm).
    pub w_max: f64,
    /// Mean spread over the non-empty probe volumes (mm).
    pub w_mean: f64,
}

impl DenoiseMetrics {
    pub fn as_array(&self) -> [f64; 3] {
        [self.nsr, self.w_max, self.w_mean]
    }
}

/// Probe tidal volumes, as fractions of the recorded maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeGrid {
    pub count: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Default for ProbeGrid {
    fn default() -> Self {
        Self { count: 20, lo: 0.05, hi: 0.95 }
    }
}

impl ProbeGrid {
    pub fn volumes(&self, tv_max: f64) -> Vec<f64> {
        if self.count == 1 {
            return vec![0.5 * (self.lo + self.hi) * tv_max];
        }
        (0..self.count)
            .map(|i| (self.lo + (self.hi - self.lo) * i as f64 / (self.count - 1) as f64) * tv_max)
            .collect()
    }
}

/// Default neighbourhood half-width: 2% of the largest tidal volume.
pub fn default_delta(tv: &[f64]) -> f64 {
    0.02 * tv.iter().copied().fold(0.0, f64::max)
}

fn centred_power(x: impl Iterator<Item = f64> + Clone) -> f64 {
    let (n, sum) = x.clone().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    if n == 0 {
        return 0.0;
    }
    let mean = sum / n as f64;
    x.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64
}

pub fn denoise_metrics(raw: &[f64], denoised: &[f64], tv: &[f64], delta_tv: f64) -> Result<DenoiseMetrics, SignalError> {
    denoise_metrics_with(raw, denoised, tv, delta_tv, &ProbeGrid::default())
}

pub fn denoise_metrics_with(
    raw: &[f64],
    denoised: &[f64],
    tv: &[f64],
    delta_tv: f64,
    grid: &ProbeGrid,
) -> Result<DenoiseMetrics, SignalError> {
    if raw.len() != denoised.len() {
        return Err(SignalError::LengthMismatch(raw.len(), denoised.len()));
    }
    if raw.len() != tv.len() {
        return Err(SignalError::LengthMismatch(raw.len(), tv.len()));
    }
    if !(delta_tv > 0.0) {
        return Err(SignalError::InvalidDelta);
    }

    let signal_power = centred_power(denoised.iter().copied());
    if signal_power == 0.0 {
        return Err(SignalError::ZeroSignalPower);
    }
    let noise_power = centred_power(raw.iter().zip(denoised).map(|(r, d)| r - d));

    let tv_max = tv.iter().copied().fold(0.0, f64::max);
    let mut spreads = Vec::with_capacity(grid.count);
    for probe in grid.volumes(tv_max) {
        let (lo, hi) = denoised
            .iter()
            .zip(tv)
            .filter(|(_, v)| (**v - probe).abs() <= delta_tv)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (d, _)| (lo.min(*d), hi.max(*d)));
        if lo.is_finite() {
            spreads.push(hi - lo);
        }
    }
    if spreads.is_empty() {
        return Err(SignalError::EmptyNeighbourhoods);
    }
    let w_max = spreads.iter().copied().fold(0.0, f64::max);
    let w_mean = spreads.iter().sum::<f64>() / spreads.len() as f64;
    Ok(DenoiseMetrics { nsr: noise_power / signal_power, w_max, w_mean })
}
