//! Respiration-driven vertebra motion prediction, motion-compensated drilling
//! trajectories and thrust-force drilling state recognition.
//!
//! The crate is organised bottom-up:
//!
//! - [`respiration`]: ventilator flow waveform, coefficient solving and tidal volume.
//! - [`motion_model`]: beam-theory mapping from tidal volume to vertebra displacement.
//! - [`signal`]: wavelet de-noising, de-noising quality metrics and basis selection.
//! - [`fitting`]: R² fitness, least squares and particle swarm identification.
//! - [`recognition`]: force features and the key-point state machine.
//! - [`compensation`]: trapezoidal compensation segments and the safety monitor.
//! - [`simulator`]: closed-loop drilling plant, single trials and batches.
//! - [`recording`], [`config`], [`manifest`]: file formats used by the CLI.
//!
//! Data-parallel loops (batch trials, swarm fitness, basis scoring) run on
//! rayon when the `parallel` feature is enabled and fall back to plain
//! iteration otherwise. Results are identical either way.

pub mod compensation;
pub mod config;
pub mod exec;
pub mod fitting;
pub mod manifest;
pub mod motion_model;
pub mod recognition;
pub mod recording;
pub mod respiration;
pub mod signal;
pub mod simulator;

pub use compensation::{monitor, segment_displacement, trapezoid_profile, MonitorConfig, MonitorVerdict, MotionSegment};
pub use exec::Execution;
pub use fitting::{fit_ols, fit_pso, r_squared, FitResult, LinePoint, PsoConfig};
pub use motion_model::{
    deflection_profile, physical_coefficients, predict_displacement, uniform_load, AxisLine, Displacement,
    DisplacementModel, DisplacementSample, SpineGeometry,
};
pub use recognition::{Calibration, Decision, Phase, Recognizer, RecognizerConfig, RecognizerState};
pub use respiration::{flow_velocity, solve_flow_coefficients, tidal_volume, FlowCoefficients, VentilatorConfig};
pub use simulator::{run_batch, run_trial, BatchSummary, BoneModel, Mode, TrialConfig, TrialResult};
