//! Weighted multi-metric selection of a wavelet basis.
//!
//! Each candidate de-noises the trace and is scored on the three metrics.
//! Every metric column is min-max normalised across candidates, and the
//! candidate with the smallest weighted sum wins. Ties go to the earlier
//! candidate.

use serde::Serialize;

use super::metrics::{default_delta, denoise_metrics, DenoiseMetrics};
use super::{denoise, SignalError, WaveletBasis};
use crate::exec::Execution;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionRow {
    pub basis: String,
    pub metrics: DenoiseMetrics,
    pub normalized: [f64; 3],
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionReport {
    pub best: usize,
    pub rows: Vec<SelectionRow>,
}

impl SelectionReport {
    pub fn best_name(&self) -> &str {
        &self.rows[self.best].basis
    }
}

/// Min-max normalise each column of `z` and rank rows by weighted sum.
pub fn rank_scores(z: &[[f64; 3]], weights: [f64; 3]) -> (usize, Vec<[f64; 3]>, Vec<f64>) {
    let mut normalized = vec![[0.0; 3]; z.len()];
    for col in 0..3 {
        let lo = z.iter().map(|r| r[col]).fold(f64::INFINITY, f64::min);
        let hi = z.iter().map(|r| r[col]).fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        for (row, out) in z.iter().zip(normalized.iter_mut()) {
            out[col] = if span > 0.0 { (row[col] - lo) / span } else { 0.0 };
        }
    }
    let scores: Vec<f64> = normalized.iter().map(|n| n.iter().zip(weights).map(|(v, w)| v * w).sum()).collect();
    let best = scores
        .iter()
        .enumerate()
        .fold(0, |best, (i, s)| if *s < scores[best] { i } else { best });
    (best, normalized, scores)
}

fn check_weights(weights: [f64; 3]) -> Result<(), SignalError> {
    let sum: f64 = weights.iter().sum();
    if weights.iter().all(|w| *w >= 0.0) && (sum - 1.0).abs() < 1e-9 {
        Ok(())
    } else {
        Err(SignalError::InvalidWeights)
    }
}

/// Score every candidate on `signal` paired with `tv` and pick the best.
pub fn select_basis(
    signal: &[f64],
    tv: &[f64],
    candidates: &[WaveletBasis],
    weights: [f64; 3],
    exec: Execution,
) -> Result<SelectionReport, SignalError> {
    if candidates.is_empty() {
        return Err(SignalError::NoCandidates);
    }
    check_weights(weights)?;
    let delta = default_delta(tv);
    let metrics = exec
        .map_slice(candidates, |basis| {
            let denoised = denoise(signal, basis)?;
            denoise_metrics(signal, &denoised, tv, delta)
        })
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;

    let z: Vec<[f64; 3]> = metrics.iter().map(DenoiseMetrics::as_array).collect();
    let (best, normalized, scores) = rank_scores(&z, weights);
    let rows = candidates
        .iter()
        .zip(metrics)
        .zip(normalized)
        .zip(scores)
        .map(|(((basis, metrics), normalized), score)| SelectionRow { basis: basis.name.clone(), metrics, normalized, score })
        .collect();
    Ok(SelectionReport { best, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dominating_candidate_wins_for_any_weights() {
        let z = [[0.5, 2.0, 1.0], [0.2, 1.0, 0.5], [0.9, 3.0, 1.2]];
        for w in [[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.2, 0.3, 0.5], [1.0 / 3.0; 3]] {
            assert_eq!(rank_scores(&z, w).0, 1);
        }
    }

    #[test]
    fn single_candidate() {
        assert_eq!(rank_scores(&[[3.0, 1.0, 2.0]], [1.0 / 3.0; 3]).0, 0);
    }

    #[test]
    fn rejects_bad_weights() {
        let b = WaveletBasis::shipped();
        let x = vec![0.0; 64];
        assert!(matches!(select_basis(&x, &x, &b, [0.5, 0.5, 0.5], Execution::Sequential), Err(SignalError::InvalidWeights)));
        assert!(matches!(select_basis(&x, &x, &b, [1.2, -0.2, 0.0], Execution::Sequential), Err(SignalError::InvalidWeights)));
        assert!(matches!(select_basis(&x, &x, &[], [1.0, 0.0, 0.0], Execution::Sequential), Err(SignalError::NoCandidates)));
    }
}
