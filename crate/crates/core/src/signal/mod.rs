//! Displacement de-noising: wavelet decomposition, band reconstruction,
//! quality metrics and weighted basis selection.

pub mod dwt;
pub mod metrics;
pub mod select;
pub mod wavelet;

use thiserror::Error;

pub use dwt::{band_reconstruct, dwt_decompose, reconstruct_all, Band, DwtDecomposition, BREATHING_BANDS};
pub use metrics::{default_delta, denoise_metrics, denoise_metrics_with, DenoiseMetrics, ProbeGrid};
pub use select::{rank_scores, select_basis, SelectionReport, SelectionRow};
pub use wavelet::{WaveletBasis, SHIPPED_BASES};

/// Decomposition depth used for breathing traces.
pub const DEFAULT_LEVELS: usize = 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("signal of length {len} is too short for {levels} levels (need at least {needed})")]
    SignalTooShort { len: usize, levels: usize, needed: usize },
    #[error("decomposition level must be at least 1")]
    InvalidLevels,
    #[error("band d{level} does not exist in a {levels}-level decomposition")]
    InvalidBand { level: usize, levels: usize },
    #[error("unknown wavelet basis '{0}'")]
    UnknownBasis(String),
    #[error("wavelet self-test failed: {0}")]
    SelfTest(String),
    #[error("input lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("neighbourhood width must be > 0")]
    InvalidDelta,
    #[error("no probe tidal volume has any sample in its neighbourhood")]
    EmptyNeighbourhoods,
    #[error("de-noised signal has zero power")]
    ZeroSignalPower,
    #[error("no candidate bases")]
    NoCandidates,
    #[error("weights must be non-negative and sum to 1")]
    InvalidWeights,
}

/// De-noise a breathing trace: keep detail levels 3-5 of a six-level decomposition.
pub fn denoise(signal: &[f64], basis: &WaveletBasis) -> Result<Vec<f64>, SignalError> {
    let dec = dwt_decompose(signal, basis, DEFAULT_LEVELS)?;
    band_reconstruct(&dec, &BREATHING_BANDS)
}
