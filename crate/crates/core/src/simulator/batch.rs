//! Independent trials over consecutive seeds.

use serde::{Deserialize, Serialize};

use super::trial::{run_trial, SimulatorError, TrialConfig, TrialResult};
use crate::exec::Execution;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub n: usize,
    pub base_seed: u64,
    pub success_rate: f64,
    pub median_f_out: f64,
    pub median_f_in: f64,
    /// Median residual over successful trials; `None` if none succeeded.
    pub median_residual_success: Option<f64>,
    pub trials: Vec<TrialResult>,
}

impl BatchSummary {
    pub fn from_trials(base_seed: u64, trials: Vec<TrialResult>) -> Self {
        let n = trials.len();
        let successes = trials.iter().filter(|t| t.success).count();
        let f_out: Vec<f64> = trials.iter().map(|t| t.f_out).collect();
        let f_in: Vec<f64> = trials.iter().map(|t| t.f_in).collect();
        let residuals: Vec<f64> = trials.iter().filter(|t| t.success).map(|t| t.residual_thickness).collect();
        Self {
            n,
            base_seed,
            success_rate: if n == 0 { 0.0 } else { successes as f64 / n as f64 },
            median_f_out: median(&f_out).unwrap_or(0.0),
            median_f_in: median(&f_in).unwrap_or(0.0),
            median_residual_success: median(&residuals),
            trials,
        }
    }

    pub fn f_out(&self) -> Vec<f64> {
        self.trials.iter().map(|t| t.f_out).collect()
    }

    pub fn f_in(&self) -> Vec<f64> {
        self.trials.iter().map(|t| t.f_in).collect()
    }
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

/// Run `n` trials with seeds `cfg.seed + i`. Traces are dropped unless `cfg.record_trace` is set.
pub fn run_batch(n: usize, cfg: &TrialConfig, exec: Execution) -> Result<BatchSummary, SimulatorError> {
    if n == 0 {
        return Err(SimulatorError::InvalidConfig("batch size must be at least 1".into()));
    }
    cfg.validate()?;
    let trials = exec
        .map_indexed(n, |i| {
            let trial = TrialConfig { seed: cfg.seed.wrapping_add(i as u64), ..cfg.clone() };
            run_trial(&trial)
        })
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BatchSummary::from_trials(cfg.seed, trials))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_cases() {
        assert_eq!(median(&[]), None);
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
    }
}
