//! Trapezoidal compensation segments and the position/force safety monitor.
//!
//! Predicted displacement is cut into fixed 125 ms periods. Each period
//! becomes one symmetric trapezoidal velocity profile that covers exactly
//! the predicted displacement change, so the superposed trajectory meets
//! the prediction at every period boundary.
//!
//! The acceleration rule is `accel = 10·v` (ramp time 0.1 s). When that
//! ramp would not fit twice into the segment, the rule is scaled by the
//! segment duration, `accel = 10·v / duration`, which keeps the ramp at a
//! tenth of the segment.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::motion_model::DisplacementSample;

/// Default compensation period (s).
pub const SEGMENT_PERIOD: f64 = 0.125;
/// Acceleration per unit peak velocity (1/s).
pub const ACCEL_PER_VELOCITY: f64 = 10.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CompensationError {
    #[error("segment duration must be finite and > 0, got {0}")]
    InfeasibleProfile(f64),
    #[error("distance must be finite, got {0}")]
    NonFiniteDistance(f64),
    #[error("predicted series is empty or shorter than one period")]
    EmptySeries,
    #[error("predicted series timestamps must be strictly increasing (index {0})")]
    NonMonotonic(usize),
    #[error("monitor thresholds must be > 0")]
    InvalidMonitor,
}

/// One trapezoidal velocity segment. Velocity and acceleration carry the sign of `distance`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionSegment {
    pub t_start: f64,
    pub duration: f64,
    pub distance: f64,
    pub peak_velocity: f64,
    pub acceleration: f64,
}

impl MotionSegment {
    pub fn ramp_time(&self) -> f64 {
        if self.acceleration == 0.0 {
            0.0
        } else {
            self.peak_velocity / self.acceleration
        }
    }

    /// Velocity at local time `t` in `[0, duration]`.
    pub fn velocity(&self, t: f64) -> f64 {
        if self.distance == 0.0 || t <= 0.0 || t >= self.duration {
            return 0.0;
        }
        let r = self.ramp_time();
        if t < r {
            self.acceleration * t
        } else if t > self.duration - r {
            self.acceleration * (self.duration - t)
        } else {
            self.peak_velocity
        }
    }

    /// Distance travelled since segment start at local time `t`.
    pub fn position(&self, t: f64) -> f64 {
        if self.distance == 0.0 || t <= 0.0 {
            return 0.0;
        }
        if t >= self.duration {
            return self.distance;
        }
        let r = self.ramp_time();
        let a = self.acceleration;
        if t < r {
            0.5 * a * t * t
        } else if t <= self.duration - r {
            0.5 * a * r * r + self.peak_velocity * (t - r)
        } else {
            let left = self.duration - t;
            self.distance - 0.5 * a * left * left
        }
    }
}

/// Build the trapezoid that covers `distance` in `duration`.
pub fn trapezoid_profile(distance: f64, duration: f64) -> Result<MotionSegment, CompensationError> {
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(CompensationError::InfeasibleProfile(duration));
    }
    if !distance.is_finite() {
        return Err(CompensationError::NonFiniteDistance(distance));
    }
    if distance == 0.0 {
        return Ok(MotionSegment { t_start: 0.0, duration, distance, peak_velocity: 0.0, acceleration: 0.0 });
    }
    let pure_ramp = 1.0 / ACCEL_PER_VELOCITY;
    let ramp = if pure_ramp < 0.5 * duration { pure_ramp } else { duration / ACCEL_PER_VELOCITY };
    // distance = v·(duration − ramp)
    let v = distance / (duration - ramp);
    Ok(MotionSegment { t_start: 0.0, duration, distance, peak_velocity: v, acceleration: v / ramp })
}

/// Per-axis compensation segments.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CompensationPlan {
    pub ap: Vec<MotionSegment>,
    pub si: Vec<MotionSegment>,
    pub lr: Vec<MotionSegment>,
}

fn interpolate(series: &[DisplacementSample], t: f64, axis: fn(&DisplacementSample) -> f64) -> f64 {
    let j = series.partition_point(|s| s.t <= t);
    if j == 0 {
        return axis(&series[0]);
    }
    if j == series.len() {
        return axis(&series[j - 1]);
    }
    let (a, b) = (&series[j - 1], &series[j]);
    let w = (t - a.t) / (b.t - a.t);
    axis(a) + w * (axis(b) - axis(a))
}

/// Cut a predicted displacement series into one segment per `period` per axis.
pub fn segment_displacement(predicted: &[DisplacementSample], period: f64) -> Result<CompensationPlan, CompensationError> {
    if !(period > 0.0) || !period.is_finite() {
        return Err(CompensationError::InfeasibleProfile(period));
    }
    let (first, last) = match (predicted.first(), predicted.last()) {
        (Some(f), Some(l)) => (f.t, l.t),
        _ => return Err(CompensationError::EmptySeries),
    };
    if let Some(i) = predicted.windows(2).position(|w| !(w[1].t > w[0].t)) {
        return Err(CompensationError::NonMonotonic(i + 1));
    }
    let count = ((last - first) / period + 1e-9).floor() as usize;
    if count == 0 {
        return Err(CompensationError::EmptySeries);
    }
    let axes: [fn(&DisplacementSample) -> f64; 3] = [|s| s.d_ap, |s| s.d_si, |s| s.d_lr];
    let mut out: [Vec<MotionSegment>; 3] = Default::default();
    for (axis, segments) in axes.into_iter().zip(out.iter_mut()) {
        segments.reserve(count);
        let mut prev = interpolate(predicted, first, axis);
        for k in 0..count {
            let t0 = first + k as f64 * period;
            let next = interpolate(predicted, first + (k + 1) as f64 * period, axis);
            let mut seg = trapezoid_profile(next - prev, period)?;
            seg.t_start = t0;
            segments.push(seg);
            prev = next;
        }
    }
    let [ap, si, lr] = out;
    Ok(CompensationPlan { ap, si, lr })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonitorConfig {
    /// Position-deviation threshold `H1` (mm).
    pub h1: f64,
    /// Force threshold `H2` (N).
    pub h2: f64,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self { h1: 1.2, h2: 10.0 }
    }
}

impl MonitorConfig {
    pub fn validate(&self) -> Result<(), CompensationError> {
        if self.h1 > 0.0 && self.h2 > 0.0 && self.h1.is_finite() && self.h2.is_finite() {
            Ok(())
        } else {
            Err(CompensationError::InvalidMonitor)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbortReason {
    PositionDeviation,
    ForceLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MonitorVerdict {
    Ok,
    Abort(AbortReason),
}

/// Safety check. Position is checked before force.
pub fn monitor(position_error: f64, force: f64, cfg: &MonitorConfig) -> MonitorVerdict {
    if position_error.abs() > cfg.h1 {
        MonitorVerdict::Abort(AbortReason::PositionDeviation)
    } else if force.abs() > cfg.h2 {
        MonitorVerdict::Abort(AbortReason::ForceLimit)
    } else {
        MonitorVerdict::Ok
    }
}
