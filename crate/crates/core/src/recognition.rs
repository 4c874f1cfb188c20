//! Thrust-force features and the drilling key-point state machine.
//!
//! The averaged force `f̄` is normalised against the outer cortical layer,
//! which the recognizer measures itself during calibration: the running
//! peak `F_max` and the drop below `K·F_max` that marks the outer
//! breakthrough fix the scale `D` and the floor `f_min`. Afterwards every
//! sample is mapped to the modified feature `a* = A*/D`.
//!
//! Transition graph (key points in brackets):
//!
//! ```text
//! Calibrating --drop below K·F_max--> OuterBreakthrough [2]
//! OuterBreakthrough --a* < C1--> Cancellous [3]
//! Cancellous --a* >= C2--> InnerRising [4]
//! InnerRising --a* >= C3 for `confirmation` samples--> StopIssued
//! InnerRising --a* < K·(inner peak)--> Failed [6]
//! any --abort / calibration timeout--> Failed
//! ```
//!
//! The thresholds-to-key-point mapping is a reconstruction, not a given
//! table. `D` is frozen once calibrated.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecognitionError {
    #[error("no outer-cortical drop found within {budget} samples")]
    CalibrationTimeout { budget: usize },
    #[error("invalid recognizer configuration: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecognizerConfig {
    /// Moving-average window `n`.
    pub window: usize,
    /// Gain `G` applied to the high part of the feature.
    pub gain: f64,
    /// `Hg`, compared against the normalised feature `A/D`.
    pub gain_threshold: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// `K`: a drop below `K` times the running peak marks a breakthrough.
    pub drop_ratio: f64,
    /// `F_th` (N): the outer peak must exceed this before calibrating.
    pub min_calibration_force: f64,
    /// Consecutive samples with `a* >= C3` required to stop.
    pub confirmation: usize,
    /// Samples allowed for calibration before giving up.
    pub calibration_budget: usize,
}

impl Default for RecognizerConfig {
    fn default() -> Self {
        Self {
            window: 10,
            gain: 1.2,
            gain_threshold: 0.5,
            c1: 0.4,
            c2: 0.7,
            c3: 0.7,
            drop_ratio: 0.5,
            min_calibration_force: 1.0,
            confirmation: 3,
            calibration_budget: 2000,
        }
    }
}

impl RecognizerConfig {
    pub fn validate(&self) -> Result<(), RecognitionError> {
        let unit = |v: f64| v > 0.0 && v < 1.0;
        if self.window == 0 {
            return Err(RecognitionError::InvalidConfig("window must be at least 1"));
        }
        if !(self.gain > 1.0) || !self.gain.is_finite() {
            return Err(RecognitionError::InvalidConfig("gain must be finite and > 1"));
        }
        if !unit(self.gain_threshold) {
            return Err(RecognitionError::InvalidConfig("gain_threshold must lie in (0, 1)"));
        }
        if !unit(self.c1) || !unit(self.c2) || !unit(self.c3) {
            return Err(RecognitionError::InvalidConfig("c1, c2 and c3 must lie in (0, 1)"));
        }
        if !unit(self.drop_ratio) {
            return Err(RecognitionError::InvalidConfig("drop_ratio must lie in (0, 1)"));
        }
        if !(self.min_calibration_force > 0.0) {
            return Err(RecognitionError::InvalidConfig("min_calibration_force must be > 0"));
        }
        if self.confirmation == 0 {
            return Err(RecognitionError::InvalidConfig("confirmation must be at least 1"));
        }
        Ok(())
    }
}

/// Streaming moving average; the first `n - 1` outputs average the available prefix.
#[derive(Debug, Clone)]
pub struct MovingAverage {
    window: usize,
    buf: VecDeque<f64>,
}

impl MovingAverage {
    pub fn new(window: usize) -> Self {
        assert!(window >= 1, "moving-average window must be at least 1");
        Self { window, buf: VecDeque::with_capacity(window) }
    }

    pub fn push(&mut self, f: f64) -> f64 {
        if self.buf.len() == self.window {
            self.buf.pop_front();
        }
        self.buf.push_back(f);
        self.buf.iter().sum::<f64>() / self.buf.len() as f64
    }
}

pub fn moving_average(stream: &[f64], window: usize) -> Vec<f64> {
    let mut ma = MovingAverage::new(window);
    stream.iter().map(|f| ma.push(*f)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Index (into the averaged stream) of the first sample satisfying the drop condition.
    pub k: usize,
    pub d: f64,
    pub f_max: f64,
    pub f_min: f64,
}

/// Incremental form of the calibration scan.
#[derive(Debug, Clone, Default)]
struct CalibrationScan {
    f_max: f64,
    f_min: f64,
    seen: usize,
}

impl CalibrationScan {
    fn push(&mut self, f_bar: f64, cfg: &RecognizerConfig) -> Option<Calibration> {
        if self.seen == 0 {
            self.f_max = f_bar;
            self.f_min = f_bar;
        } else {
            self.f_max = self.f_max.max(f_bar);
            self.f_min = self.f_min.min(f_bar);
        }
        let i = self.seen;
        self.seen += 1;
        (f_bar < cfg.drop_ratio * self.f_max && self.f_max > cfg.min_calibration_force).then(|| Calibration {
            k: i,
            d: self.f_max - self.f_min,
            f_max: self.f_max,
            f_min: self.f_min,
        })
    }
}

/// Find `k` and `D` on an averaged force stream that starts at drill contact.
pub fn calibrate(f_bar: &[f64], cfg: &RecognizerConfig) -> Result<Calibration, RecognitionError> {
    let mut scan = CalibrationScan::default();
    f_bar
        .iter()
        .take(cfg.calibration_budget)
        .find_map(|f| scan.push(*f, cfg))
        .ok_or(RecognitionError::CalibrationTimeout { budget: cfg.calibration_budget })
}

/// Cubic feature `A`: zero below the floor, `D` above the outer peak.
pub fn feature(f_bar: f64, cal: &Calibration) -> f64 {
    let x = (f_bar - cal.f_min) / cal.d;
    if x > 1.0 {
        cal.d
    } else if x >= 0.0 {
        cal.d * x * x * x
    } else {
        0.0
    }
}

/// Modified feature `A*`: the part above `Hg·D` is amplified by `G`.
pub fn modified_feature(a: f64, cal: &Calibration, cfg: &RecognizerConfig) -> f64 {
    if a / cal.d <= cfg.gain_threshold {
        a
    } else {
        cfg.gain * a
    }
}

/// Normalised modified feature `A*/D` for one averaged sample.
pub fn normalized_feature(f_bar: f64, cal: &Calibration, cfg: &RecognizerConfig) -> f64 {
    modified_feature(feature(f_bar, cal), cal, cfg) / cal.d
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Calibrating,
    OuterBreakthrough,
    Cancellous,
    InnerRising,
    StopIssued,
    Failed,
}

impl Phase {
    pub fn is_terminal(self) -> bool {
        matches!(self, Phase::StopIssued | Phase::Failed)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Calibrating => "calibrating",
            Phase::OuterBreakthrough => "outer_breakthrough",
            Phase::Cancellous => "cancellous",
            Phase::InnerRising => "inner_rising",
            Phase::StopIssued => "stop_issued",
            Phase::Failed => "failed",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Continue,
    Stop,
    Fail,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Continue => "continue",
            Decision::Stop => "stop",
            Decision::Fail => "fail",
        }
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailReason {
    CalibrationTimeout,
    /// The feature collapsed inside the inner layer before a stop was confirmed.
    InnerBreakthrough,
    /// Injected by the caller, typically a safety-monitor abort.
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecognizerState {
    pub phase: Phase,
    /// Last key point reached, 0 before contact.
    pub last_key_point: u8,
    pub calibration: Option<Calibration>,
    /// Normalised feature values since calibration.
    pub history: Vec<f64>,
    pub confirm_count: usize,
    pub inner_peak: f64,
    pub fail_reason: Option<FailReason>,
}

impl Default for RecognizerState {
    fn default() -> Self {
        Self {
            phase: Phase::Calibrating,
            last_key_point: 0,
            calibration: None,
            history: Vec::new(),
            confirm_count: 0,
            inner_peak: 0.0,
            fail_reason: None,
        }
    }
}

impl RecognizerState {
    /// State right after a successful calibration.
    pub fn calibrated(cal: Calibration) -> Self {
        Self { phase: Phase::OuterBreakthrough, last_key_point: 2, calibration: Some(cal), ..Self::default() }
    }

    fn fail(&mut self, reason: FailReason) -> Decision {
        self.phase = Phase::Failed;
        self.fail_reason = Some(reason);
        Decision::Fail
    }
}

/// Advance a calibrated state by one normalised feature value.
pub fn step(state: &mut RecognizerState, a_star: f64, cfg: &RecognizerConfig) -> Decision {
    match state.phase {
        Phase::StopIssued => return Decision::Stop,
        Phase::Failed => return Decision::Fail,
        Phase::Calibrating => return Decision::Continue,
        _ => {}
    }
    state.history.push(a_star);
    match state.phase {
        Phase::OuterBreakthrough if a_star < cfg.c1 => {
            state.phase = Phase::Cancellous;
            state.last_key_point = 3;
        }
        Phase::Cancellous if a_star >= cfg.c2 => {
            state.phase = Phase::InnerRising;
            state.last_key_point = 4;
            state.inner_peak = a_star;
            state.confirm_count = usize::from(a_star >= cfg.c3);
        }
        Phase::InnerRising => {
            if a_star > state.inner_peak {
                state.inner_peak = a_star;
            }
            if a_star < cfg.drop_ratio * state.inner_peak {
                state.last_key_point = 6;
                return state.fail(FailReason::InnerBreakthrough);
            }
            state.confirm_count = if a_star >= cfg.c3 { state.confirm_count + 1 } else { 0 };
        }
        _ => {}
    }
    if state.phase == Phase::InnerRising && state.confirm_count >= cfg.confirmation {
        state.phase = Phase::StopIssued;
        return Decision::Stop;
    }
    Decision::Continue
}

/// One processed input sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub index: usize,
    pub f_bar: f64,
    /// `None` until calibrated.
    pub a_star: Option<f64>,
    pub phase: Phase,
    pub decision: Decision,
}

/// Streaming recognizer owning the moving average and the state machine.
#[derive(Debug, Clone)]
pub struct Recognizer {
    cfg: RecognizerConfig,
    ma: MovingAverage,
    scan: CalibrationScan,
    state: RecognizerState,
    index: usize,
}

impl Recognizer {
    pub fn new(cfg: RecognizerConfig) -> Result<Self, RecognitionError> {
        cfg.validate()?;
        Ok(Self {
            ma: MovingAverage::new(cfg.window),
            cfg,
            scan: CalibrationScan::default(),
            state: RecognizerState::default(),
            index: 0,
        })
    }

    pub fn config(&self) -> &RecognizerConfig {
        &self.cfg
    }

    pub fn state(&self) -> &RecognizerState {
        &self.state
    }

    pub fn phase(&self) -> Phase {
        self.state.phase
    }

    /// Latch a failure from outside (monitor abort).
    pub fn abort(&mut self) {
        if !self.state.phase.is_terminal() {
            self.state.fail(FailReason::Aborted);
        }
    }

    /// Feed one force sample (N).
    pub fn push(&mut self, force: f64) -> StepRecord {
        let index = self.index;
        self.index += 1;
        let f_bar = self.ma.push(force);
        let mut a_star = None;
        let decision = match self.state.phase {
            Phase::StopIssued => Decision::Stop,
            Phase::Failed => Decision::Fail,
            Phase::Calibrating => {
                if self.state.last_key_point == 0 && f_bar > self.cfg.min_calibration_force {
                    self.state.last_key_point = 1;
                }
                if let Some(cal) = self.scan.push(f_bar, &self.cfg) {
                    self.state = RecognizerState::calibrated(cal);
                    a_star = Some(normalized_feature(f_bar, &cal, &self.cfg));
                    Decision::Continue
                } else if self.scan.seen >= self.cfg.calibration_budget {
                    self.state.fail(FailReason::CalibrationTimeout)
                } else {
                    Decision::Continue
                }
            }
            _ => {
                let cal = self.state.calibration.expect("calibrated phases carry a calibration");
                let v = normalized_feature(f_bar, &cal, &self.cfg);
                a_star = Some(v);
                step(&mut self.state, v, &self.cfg)
            }
        };
        StepRecord { index, f_bar, a_star, phase: self.state.phase, decision }
    }
}

/// Replay a recorded force stream; stops emitting after the first terminal decision.
pub fn replay(forces: &[f64], cfg: &RecognizerConfig) -> Result<Vec<StepRecord>, RecognitionError> {
    let mut rec = Recognizer::new(cfg.clone())?;
    let mut out = Vec::with_capacity(forces.len());
    for f in forces {
        let r = rec.push(*f);
        out.push(r);
        if r.decision != Decision::Continue {
            break;
        }
    }
    Ok(out)
}

/// Index of the stop decision in a replay, if any.
pub fn stop_index(records: &[StepRecord]) -> Option<usize> {
    records.iter().find(|r| r.decision == Decision::Stop).map(|r| r.index)
}
