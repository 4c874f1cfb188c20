//! One closed-loop drilling trial.
//!
//! Coordinates run along the drilling (AP) axis, positive into the bone.
//! The bone surface sits at `-d_ap(t)`, so inhalation moves it toward the
//! tool. The tool starts `approach_gap` mm above the resting surface and
//! feeds at a constant rate; in compensated mode it also replays the
//! trapezoid segments planned from the predicted displacement.
//!
//! Every tick the plant produces one raw force sample. The safety monitor
//! reads the mean of the last `block_size` raw samples every tick, and the
//! recognizer receives one block mean every `block_size` ticks.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::plant::{force_plant, BoneModel, Layer};
use crate::compensation::{monitor, trapezoid_profile, AbortReason, MonitorConfig, MonitorVerdict, MotionSegment};
use crate::motion_model::{physical_coefficients, DisplacementModel, SpineGeometry};
use crate::recognition::{Decision, MovingAverage, Phase, Recognizer, RecognizerConfig};
use crate::respiration::{solve_flow_coefficients, tidal_volume, FlowCoefficients, VentilatorConfig};

#[derive(Debug, Error)]
pub enum SimulatorError {
    #[error("invalid trial configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Respiration(#[from] crate::respiration::RespirationError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Stationary,
    #[serde(rename = "uncompensated")]
    MovingUncompensated,
    #[serde(rename = "compensated")]
    MovingCompensated,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Stationary, Mode::MovingUncompensated, Mode::MovingCompensated];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Stationary => "stationary",
            Mode::MovingUncompensated => "uncompensated",
            Mode::MovingCompensated => "compensated",
        }
    }

    pub fn is_moving(self) -> bool {
        self != Mode::Stationary
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "stationary" | "a" => Ok(Mode::Stationary),
            "uncompensated" | "b" => Ok(Mode::MovingUncompensated),
            "compensated" | "c" => Ok(Mode::MovingCompensated),
            other => Err(format!("unknown mode '{other}' (expected stationary, uncompensated or compensated)")),
        }
    }
}

/// Overrides the monitor inputs from `at` seconds onward.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FaultInjection {
    pub at: f64,
    /// Added to the predicted-vs-actual bone position error (mm).
    pub position_offset: f64,
    /// Replaces the monitored force (N).
    pub force_override: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub mode: Mode,
    /// mm/s
    pub feed_rate: f64,
    pub spindle_rpm: f64,
    /// s
    pub tick: f64,
    /// Raw samples averaged into one recognizer input.
    pub block_size: usize,
    /// Raw samples averaged for the monitor's force check.
    pub monitor_window: usize,
    /// Time constant (s) of the lag between commanded penetration and the
    /// cutting front. Zero cuts straight to the commanded position.
    pub cut_lag: f64,
    /// Initial tool clearance above the resting bone surface (mm).
    pub approach_gap: f64,
    /// Compensation segment length (s).
    pub segment_period: f64,
    /// Give up after this much simulated time (s).
    pub max_duration: f64,
    pub ventilator: VentilatorConfig,
    /// Model used for prediction and compensation.
    pub model: DisplacementModel,
    /// Model that actually moves the bone; defaults to `model`.
    pub actual_model: Option<DisplacementModel>,
    pub recognizer: RecognizerConfig,
    pub monitor: MonitorConfig,
    pub bone: BoneModel,
    pub seed: u64,
    pub recognizer_enabled: bool,
    pub monitor_enabled: bool,
    pub fault: Option<FaultInjection>,
    pub record_trace: bool,
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Stationary,
            feed_rate: 0.5,
            spindle_rpm: 12_000.0,
            tick: 0.001,
            block_size: 50,
            monitor_window: 500,
            cut_lag: 0.2,
            approach_gap: 1.0,
            segment_period: crate::compensation::SEGMENT_PERIOD,
            max_duration: 120.0,
            ventilator: VentilatorConfig::default(),
            model: physical_coefficients(&SpineGeometry::default()),
            actual_model: None,
            recognizer: RecognizerConfig::default(),
            monitor: MonitorConfig::default(),
            bone: BoneModel::default(),
            seed: 0,
            recognizer_enabled: true,
            monitor_enabled: true,
            fault: None,
            record_trace: true,
        }
    }
}

impl TrialConfig {
    pub fn validate(&self) -> Result<(), SimulatorError> {
        let bad = |m: &str| Err(SimulatorError::InvalidConfig(m.to_string()));
        if !(self.feed_rate > 0.0) || !self.feed_rate.is_finite() {
            return bad("feed_rate must be > 0");
        }
        if !(self.spindle_rpm > 0.0) || !self.spindle_rpm.is_finite() {
            return bad("spindle_rpm must be > 0");
        }
        if !(self.tick > 0.0 && self.tick <= 0.0125) {
            return bad("tick must lie in (0, 0.0125] s");
        }
        if self.block_size == 0 {
            return bad("block_size must be at least 1");
        }
        if self.monitor_window == 0 {
            return bad("monitor_window must be at least 1");
        }
        if !(self.cut_lag >= 0.0) || !self.cut_lag.is_finite() {
            return bad("cut_lag must be finite and >= 0");
        }
        if !(self.approach_gap >= 0.0) {
            return bad("approach_gap must be >= 0");
        }
        if !(self.segment_period >= self.tick) {
            return bad("segment_period must be at least one tick");
        }
        if !(self.max_duration > 0.0) {
            return bad("max_duration must be > 0");
        }
        self.bone.validate().map_err(|e| SimulatorError::InvalidConfig(e.to_string()))?;
        self.recognizer.validate().map_err(|e| SimulatorError::InvalidConfig(e.to_string()))?;
        self.monitor.validate().map_err(|e| SimulatorError::InvalidConfig(e.to_string()))?;
        self.ventilator.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    Stop,
    PositionAbort,
    ForceAbort,
    RecognizerFailed,
    Breakthrough,
    TimeLimit,
}

impl EndReason {
    pub fn as_str(self) -> &'static str {
        match self {
            EndReason::Stop => "stop",
            EndReason::PositionAbort => "position_abort",
            EndReason::ForceAbort => "force_abort",
            EndReason::RecognizerFailed => "recognizer_failed",
            EndReason::Breakthrough => "breakthrough",
            EndReason::TimeLimit => "time_limit",
        }
    }
}

impl fmt::Display for EndReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One row per recognizer input block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    /// Block-mean raw force (N).
    pub force: f64,
    pub bone_pos: f64,
    pub tool_pos: f64,
    pub depth: f64,
    pub f_bar: f64,
    pub a_star: Option<f64>,
    pub phase: Phase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub mode: Mode,
    pub seed: u64,
    pub spindle_rpm: f64,
    /// Deepest cut when the trial ended (mm).
    pub stop_depth: f64,
    /// Uncut bone beyond the stop depth (mm); negative once the drill is through.
    pub residual_thickness: f64,
    /// Stopped by the recognizer with residual in (0, 2] mm.
    pub success: bool,
    /// Peak averaged force while cutting the outer cortical layer (N).
    pub f_out: f64,
    /// Peak averaged force while cutting the inner cortical layer; 0 if never reached (N).
    pub f_in: f64,
    pub end_reason: EndReason,
    pub abort_reason: Option<AbortReason>,
    pub end_time: f64,
    /// Variance of the tool-minus-bone velocity over the trial ((mm/s)²).
    pub relative_feed_variance: f64,
    /// Breathing phase at t = 0 (s).
    pub breathing_offset: f64,
    pub trace: Vec<TraceRow>,
}

/// Residual thickness range counted as a successful stop (mm).
pub const SUCCESS_RESIDUAL_MAX: f64 = 2.0;

pub fn is_success(end_reason: EndReason, residual: f64) -> bool {
    end_reason == EndReason::Stop && residual > 0.0 && residual <= SUCCESS_RESIDUAL_MAX
}

/// Running mean and variance.
#[derive(Debug, Clone, Copy, Default)]
struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / self.n as f64
        }
    }
}

/// Sliding mean over the last `n` samples.
#[derive(Debug, Clone)]
struct Window {
    n: usize,
    buf: VecDeque<f64>,
    sum: f64,
}

impl Window {
    fn new(n: usize) -> Self {
        Self { n, buf: VecDeque::with_capacity(n), sum: 0.0 }
    }

    fn push(&mut self, x: f64) -> f64 {
        if self.buf.len() == self.n {
            self.sum -= self.buf.pop_front().unwrap_or(0.0);
        }
        self.buf.push_back(x);
        self.sum += x;
        self.sum / self.buf.len() as f64
    }
}

/// Compensation offset replayed from trapezoid segments planned one period ahead.
struct Compensator {
    period: f64,
    index: usize,
    base: f64,
    segment: MotionSegment,
}

impl Compensator {
    fn new(period: f64, predict: &impl Fn(f64) -> f64) -> Result<Self, SimulatorError> {
        let base = predict(0.0);
        let segment = plan(period, 0, base, predict)?;
        Ok(Self { period, index: 0, base, segment })
    }

    fn offset(&mut self, t: f64, predict: &impl Fn(f64) -> f64) -> Result<f64, SimulatorError> {
        while t >= (self.index + 1) as f64 * self.period {
            self.base += self.segment.distance;
            self.index += 1;
            self.segment = plan(self.period, self.index, self.base, predict)?;
        }
        Ok(self.base + self.segment.position(t - self.index as f64 * self.period))
    }
}

fn plan(period: f64, index: usize, base: f64, predict: &impl Fn(f64) -> f64) -> Result<MotionSegment, SimulatorError> {
    let t0 = index as f64 * period;
    let mut seg = trapezoid_profile(predict(t0 + period) - base, period)
        .map_err(|e| SimulatorError::InvalidConfig(e.to_string()))?;
    seg.t_start = t0;
    Ok(seg)
}

/// Run one trial to its first terminal event.
pub fn run_trial(cfg: &TrialConfig) -> Result<TrialResult, SimulatorError> {
    cfg.validate()?;
    let coeffs = solve_flow_coefficients(&cfg.ventilator, 1e-10)?.coefficients;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let offset = rng.gen_range(0.0..coeffs.period);

    let moving = cfg.mode.is_moving();
    let actual = cfg.actual_model.unwrap_or(cfg.model);
    let ap = |m: &DisplacementModel, coeffs: &FlowCoefficients, t: f64| m.ap.eval(tidal_volume(t + offset, coeffs));
    let predicted = |t: f64| if moving { ap(&cfg.model, &coeffs, t) } else { 0.0 };
    let bone_disp = |t: f64| if moving { ap(&actual, &coeffs, t) } else { 0.0 };
    let mut compensator = match cfg.mode {
        Mode::MovingCompensated => Some(Compensator::new(cfg.segment_period, &predicted)?),
        _ => None,
    };

    let bone = &cfg.bone;
    let total = bone.total_thickness();
    let mut recognizer = Recognizer::new(cfg.recognizer.clone()).map_err(|e| SimulatorError::InvalidConfig(e.to_string()))?;
    let mut f_bar_only = MovingAverage::new(cfg.recognizer.window);
    let mut monitor_window = Window::new(cfg.monitor_window);
    let mut rel_var = Welford::default();

    let follow = if cfg.cut_lag > 0.0 { 1.0 - (-cfg.tick / cfg.cut_lag).exp() } else { 1.0 };
    let max_ticks = (cfg.max_duration / cfg.tick).ceil() as u64;
    let mut max_cut = 0.0_f64;
    let comp0 = match compensator.as_mut() {
        Some(c) => c.offset(0.0, &predicted)?,
        None => 0.0,
    };
    let mut pen_prev = -cfg.approach_gap - comp0 + bone_disp(0.0);
    let (mut block_sum, mut block_n) = (0.0, 0usize);
    let (mut f_out, mut f_in) = (0.0_f64, 0.0_f64);
    let mut trace = Vec::new();
    let mut end = (EndReason::TimeLimit, None, cfg.max_duration);

    for i in 1..=max_ticks {
        let t = i as f64 * cfg.tick;
        let comp = match compensator.as_mut() {
            Some(c) => c.offset(t, &predicted)?,
            None => 0.0,
        };
        let tool = -cfg.approach_gap + cfg.feed_rate * t - comp;
        let bone_pos = -bone_disp(t);
        let pen = tool - bone_pos;
        rel_var.push((pen - pen_prev) / cfg.tick);
        pen_prev = pen;

        let cut_rate = if pen > max_cut {
            let step = (pen - max_cut) * follow;
            max_cut += step;
            step / cfg.tick
        } else {
            0.0
        };
        let force = force_plant(cut_rate, max_cut, bone, cfg.spindle_rpm, &mut rng);

        let mut monitored_force = monitor_window.push(force);
        let mut position_error = predicted(t) - bone_disp(t);
        if let Some(fault) = cfg.fault.filter(|f| t >= f.at) {
            position_error += fault.position_offset;
            if let Some(f) = fault.force_override {
                monitored_force = f;
            }
        }
        if cfg.monitor_enabled {
            if let MonitorVerdict::Abort(reason) = monitor(position_error, monitored_force, &cfg.monitor) {
                recognizer.abort();
                let why = match reason {
                    AbortReason::PositionDeviation => EndReason::PositionAbort,
                    AbortReason::ForceLimit => EndReason::ForceAbort,
                };
                end = (why, Some(reason), t);
                break;
            }
        }

        block_sum += force;
        block_n += 1;
        if block_n == cfg.block_size {
            let block = block_sum / block_n as f64;
            block_sum = 0.0;
            block_n = 0;
            let (f_bar, a_star, phase, decision) = if cfg.recognizer_enabled {
                let r = recognizer.push(block);
                (r.f_bar, r.a_star, r.phase, r.decision)
            } else {
                (f_bar_only.push(block), None, Phase::Calibrating, Decision::Continue)
            };
            match bone.layer_at(max_cut) {
                Layer::OuterCortical => f_out = f_out.max(f_bar),
                Layer::InnerCortical => f_in = f_in.max(f_bar),
                _ => {}
            }
            if cfg.record_trace {
                trace.push(TraceRow { t, force: block, bone_pos, tool_pos: tool, depth: max_cut, f_bar, a_star, phase });
            }
            match decision {
                Decision::Stop => {
                    end = (EndReason::Stop, None, t);
                    break;
                }
                Decision::Fail => {
                    end = (EndReason::RecognizerFailed, None, t);
                    break;
                }
                Decision::Continue => {}
            }
        }

        if max_cut >= total {
            end = (EndReason::Breakthrough, None, t);
            break;
        }
    }

    let residual = total - max_cut;
    Ok(TrialResult {
        mode: cfg.mode,
        seed: cfg.seed,
        spindle_rpm: cfg.spindle_rpm,
        stop_depth: max_cut,
        residual_thickness: residual,
        success: is_success(end.0, residual),
        f_out,
        f_in,
        end_reason: end.0,
        abort_reason: end.1,
        end_time: end.2,
        relative_feed_variance: rel_var.variance(),
        breathing_offset: offset,
        trace,
    })
}
