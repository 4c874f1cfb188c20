//! Ventilator flow waveform and real-time tidal volume.
//!
//! Volume-controlled ventilation with a square inhale and an exponentially
//! decaying exhale. Inhale flow is positive, exhale flow negative, and tidal
//! volume is measured from the start of each inhale so it is never negative.
//!
//! Over one period `T` with inhale duration `t_in` and exhale duration
//! `t_ex = T - t_in` the flow is
//!
//! ```text
//! F(t) = a                           0 <= t < t_in
//! F(t) = -k * a * b^(t - t_in) + c   t_in <= t < T
//! ```
//!
//! where `k` is the exhale peak factor. `a` is fixed by the inhale volume
//! and `(b, c)` are found by driving two boundary residuals to zero: the
//! exhale flow must reach zero at the end of the period, and the net volume
//! over a period must vanish.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Flow coefficients printed in the literature for the 500 ml, 12 /min, 1:2
/// setting. They do not satisfy the boundary residuals and are kept only for
/// comparison reports.
pub const LITERATURE_B: f64 = 0.4602;
/// See [`LITERATURE_B`].
pub const LITERATURE_C: f64 = 0.0753;

/// Default iteration cap for [`solve_flow_coefficients`].
pub const MAX_SOLVER_ITERATIONS: usize = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RespirationError {
    #[error("invalid ventilator setting: {0}")]
    InvalidConfig(String),
    #[error("waveform pair {inhale:?}/{exhale:?} has no coefficient solver")]
    UnsupportedWaveform { inhale: WaveformKind, exhale: WaveformKind },
    #[error(
        "flow coefficient solver did not converge after {iterations} iterations \
         (best b = {b}, c = {c}, residuals = [{:e}, {:e}])",
        residuals[0], residuals[1]
    )]
    SolverFailure { iterations: usize, b: f64, c: f64, residuals: [f64; 2] },
}

/// Basic ventilator flow shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaveformKind {
    Square,
    AscendingRamp,
    DescendingRamp,
    Sine,
    ExponentialRise,
    ExponentialDecay,
}

/// Ventilator settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VentilatorConfig {
    /// Maximum tidal volume (ml).
    pub tv_max: f64,
    /// Respiratory rate (breaths per minute).
    pub resp_freq: f64,
    /// Inhale part of the inhale:exhale ratio.
    pub ratio_in: f64,
    /// Exhale part of the inhale:exhale ratio.
    pub ratio_out: f64,
    /// Peak exhale flow as a multiple of the inhale flow.
    pub exhale_peak_factor: f64,
    pub inhale_waveform: WaveformKind,
    pub exhale_waveform: WaveformKind,
}

impl Default for VentilatorConfig {
    /// 500 ml, 12 /min, 1:2 with an exhale peak factor of 2.0.
    ///
    /// With a 1:2 ratio the boundary residuals only have a root when the
    /// exhale peak factor exceeds roughly 1.675, so the operating-room value
    /// of about 1.5 ([`VentilatorConfig::operating_room`]) cannot be solved
    /// exactly. 2.0 is the default used for simulation.
    fn default() -> Self {
        Self { exhale_peak_factor: 2.0, ..Self::operating_room() }
    }
}

impl VentilatorConfig {
    /// The operating-room setting: 500 ml, 12 /min, 1:2, exhale peak about 1.5x.
    pub fn operating_room() -> Self {
        Self {
            tv_max: 500.0,
            resp_freq: 12.0,
            ratio_in: 1.0,
            ratio_out: 2.0,
            exhale_peak_factor: 1.5,
            inhale_waveform: WaveformKind::Square,
            exhale_waveform: WaveformKind::ExponentialDecay,
        }
    }

    pub fn validate(&self) -> Result<(), RespirationError> {
        let check = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(RespirationError::InvalidConfig(msg.into())) };
        check(self.tv_max.is_finite() && self.tv_max > 0.0, "tv_max must be > 0")?;
        check(self.resp_freq.is_finite() && self.resp_freq > 0.0, "resp_freq must be > 0")?;
        check(self.ratio_in.is_finite() && self.ratio_in > 0.0, "ratio_in must be > 0")?;
        check(self.ratio_out.is_finite() && self.ratio_out > 0.0, "ratio_out must be > 0")?;
        check(
            self.exhale_peak_factor.is_finite() && self.exhale_peak_factor > 1.0,
            "exhale_peak_factor must be > 1",
        )
    }

    /// Breathing period (s).
    pub fn period(&self) -> f64 {
        60.0 / self.resp_freq
    }

    /// Inhale duration (s).
    pub fn t_inhale(&self) -> f64 {
        60.0 * self.ratio_in / (self.resp_freq * (self.ratio_in + self.ratio_out))
    }

    /// Square-wave inhale flow that delivers `tv_max` over the inhale (ml/s).
    ///
    /// Evaluated as `tv_max * (r_in + r_out) * f / (60 r_in)` so round
    /// settings give an exactly representable result.
    pub fn inhale_flow(&self) -> f64 {
        self.tv_max * (self.ratio_in + self.ratio_out) * self.resp_freq / (60.0 * self.ratio_in)
    }
}

/// Solved flow-curve constants for one ventilator setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowCoefficients {
    /// Inhale flow (ml/s).
    pub a: f64,
    /// Exhale decay base, per second.
    pub b: f64,
    /// Exhale flow offset (ml/s).
    pub c: f64,
    pub t_inhale: f64,
    pub period: f64,
    pub exhale_peak_factor: f64,
}

impl FlowCoefficients {
    /// Build coefficients for `cfg` with externally chosen `(b, c)`.
    pub fn with_exhale(cfg: &VentilatorConfig, b: f64, c: f64) -> Self {
        Self {
            a: cfg.inhale_flow(),
            b,
            c,
            t_inhale: cfg.t_inhale(),
            period: cfg.period(),
            exhale_peak_factor: cfg.exhale_peak_factor,
        }
    }

    pub fn t_exhale(&self) -> f64 {
        self.period - self.t_inhale
    }

    fn phase(&self, t: f64) -> f64 {
        t.rem_euclid(self.period)
    }

    /// The two boundary residuals at the stored `(b, c)`:
    /// `[F(T-), net volume over one period]`.
    pub fn residuals(&self) -> [f64; 2] {
        let te = self.t_exhale();
        let k_a = self.exhale_peak_factor * self.a;
        let bt = self.b.powf(te);
        let ln_b = self.b.ln();
        [-k_a * bt + self.c, self.a * self.t_inhale + self.c * te - k_a * (bt - 1.0) / ln_b]
    }

    fn jacobian(&self) -> [[f64; 2]; 2] {
        let te = self.t_exhale();
        let k_a = self.exhale_peak_factor * self.a;
        let b = self.b;
        let ln_b = b.ln();
        let bt = b.powf(te);
        let dbt = te * b.powf(te - 1.0);
        let d_int = dbt / ln_b - (bt - 1.0) / (b * ln_b * ln_b);
        [[-k_a * dbt, 1.0], [-k_a * d_int, te]]
    }
}

/// Solution report of [`solve_flow_coefficients`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowSolution {
    pub coefficients: FlowCoefficients,
    pub residuals: [f64; 2],
    pub iterations: usize,
}

/// Solve the exhale constants `(b, c)` for `cfg`.
///
/// `a` is fixed at `tv_max / t_inhale`. The remaining two residuals are
/// solved with a scaled dogleg trust-region iteration started from
/// `(b, c) = (0.5, 0.0)`, and the call succeeds once both residuals are
/// below `tol` in absolute value.
pub fn solve_flow_coefficients(cfg: &VentilatorConfig, tol: f64) -> Result<FlowSolution, RespirationError> {
    solve_flow_coefficients_capped(cfg, tol, MAX_SOLVER_ITERATIONS)
}

pub fn solve_flow_coefficients_capped(
    cfg: &VentilatorConfig,
    tol: f64,
    max_iterations: usize,
) -> Result<FlowSolution, RespirationError> {
    cfg.validate()?;
    if cfg.inhale_waveform != WaveformKind::Square || cfg.exhale_waveform != WaveformKind::ExponentialDecay {
        return Err(RespirationError::UnsupportedWaveform { inhale: cfg.inhale_waveform, exhale: cfg.exhale_waveform });
    }

    let mut x = FlowCoefficients::with_exhale(cfg, 0.5, 0.0);
    let mut r = x.residuals();
    let mut scale = [0.0_f64; 2];
    let mut radius = 0.0;
    let mut iterations = 0;

    while iterations < max_iterations {
        if r[0].abs() < tol && r[1].abs() < tol {
            return Ok(FlowSolution { coefficients: x, residuals: r, iterations });
        }
        iterations += 1;

        let j = x.jacobian();
        for col in 0..2 {
            let norm = j[0][col].hypot(j[1][col]);
            scale[col] = scale[col].max(if norm > 0.0 { norm } else { 1.0 });
        }
        if radius == 0.0 {
            let dx = (scale[0] * x.b).hypot(scale[1] * x.c);
            radius = if dx > 0.0 { 100.0 * dx } else { 100.0 };
        }

        // Scaled Jacobian js = J * D^-1, step in scaled coordinates.
        let js = [[j[0][0] / scale[0], j[0][1] / scale[1]], [j[1][0] / scale[0], j[1][1] / scale[1]]];
        let step = dogleg_step(&js, &r, radius);
        let trial_b = x.b + step[0] / scale[0];
        let trial_c = x.c + step[1] / scale[1];

        let predicted = {
            let jp = [js[0][0] * step[0] + js[0][1] * step[1], js[1][0] * step[0] + js[1][1] * step[1]];
            norm2(&r) - norm2(&[r[0] + jp[0], r[1] + jp[1]])
        };
        let step_norm = step[0].hypot(step[1]);

        let accepted = if trial_b > 0.0 && trial_b < 1.0 && trial_c.is_finite() {
            let trial = FlowCoefficients { b: trial_b, c: trial_c, ..x };
            let tr = trial.residuals();
            let actual = norm2(&r) - norm2(&tr);
            let rho = if predicted > 0.0 { actual / predicted } else { -1.0 };
            if rho < 0.25 {
                radius = 0.25 * step_norm;
            } else if rho > 0.75 {
                radius = radius.max(2.0 * step_norm);
            }
            if rho > 1e-4 {
                Some((trial, tr))
            } else {
                None
            }
        } else {
            radius = 0.25 * step_norm;
            None
        };

        if let Some((trial, tr)) = accepted {
            x = trial;
            r = tr;
        }
        let dx = (scale[0] * x.b).hypot(scale[1] * x.c);
        if radius <= f64::EPSILON * dx.max(1.0) {
            break;
        }
    }

    if r[0].abs() < tol && r[1].abs() < tol {
        return Ok(FlowSolution { coefficients: x, residuals: r, iterations });
    }
    Err(RespirationError::SolverFailure { iterations, b: x.b, c: x.c, residuals: r })
}

fn norm2(v: &[f64; 2]) -> f64 {
    v[0] * v[0] + v[1] * v[1]
}

fn dogleg_step(j: &[[f64; 2]; 2], r: &[f64; 2], radius: f64) -> [f64; 2] {
    // Gradient of 0.5 |r|^2 is J^T r.
    let g = [j[0][0] * r[0] + j[1][0] * r[1], j[0][1] * r[0] + j[1][1] * r[1]];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let newton = if det.abs() > 1e-300 {
        Some([-(j[1][1] * r[0] - j[0][1] * r[1]) / det, -(-j[1][0] * r[0] + j[0][0] * r[1]) / det])
    } else {
        None
    };
    if let Some(p) = newton {
        if p[0].hypot(p[1]) <= radius {
            return p;
        }
    }

    let g_norm = g[0].hypot(g[1]);
    if g_norm == 0.0 {
        return [0.0, 0.0];
    }
    let jg = [j[0][0] * g[0] + j[0][1] * g[1], j[1][0] * g[0] + j[1][1] * g[1]];
    let t = g_norm * g_norm / norm2(&jg);
    let cauchy = [-t * g[0], -t * g[1]];
    let cauchy_norm = cauchy[0].hypot(cauchy[1]);
    let Some(p) = newton else {
        let s = radius.min(cauchy_norm) / g_norm;
        return [-s * g[0], -s * g[1]];
    };
    if cauchy_norm >= radius {
        let s = radius / g_norm;
        return [-s * g[0], -s * g[1]];
    }
    // Walk from the Cauchy point toward the Newton point until the boundary.
    let d = [p[0] - cauchy[0], p[1] - cauchy[1]];
    let qa = norm2(&d);
    let qb = 2.0 * (cauchy[0] * d[0] + cauchy[1] * d[1]);
    let qc = cauchy_norm * cauchy_norm - radius * radius;
    let tau = (-qb + (qb * qb - 4.0 * qa * qc).sqrt()) / (2.0 * qa);
    [cauchy[0] + tau * d[0], cauchy[1] + tau * d[1]]
}

/// Ventilator flow (ml/s) at time `t` seconds after the start of an inhale.
pub fn flow_velocity(t: f64, coeffs: &FlowCoefficients) -> f64 {
    let tau = coeffs.phase(t);
    if tau < coeffs.t_inhale {
        coeffs.a
    } else {
        -coeffs.exhale_peak_factor * coeffs.a * coeffs.b.powf(tau - coeffs.t_inhale) + coeffs.c
    }
}

/// Tidal volume (ml): closed-form integral of [`flow_velocity`] from the
/// start of the current breath, clamped to be non-negative.
pub fn tidal_volume(t: f64, coeffs: &FlowCoefficients) -> f64 {
    let tau = coeffs.phase(t);
    let v = if tau < coeffs.t_inhale {
        coeffs.a * tau
    } else {
        let s = tau - coeffs.t_inhale;
        let k_a = coeffs.exhale_peak_factor * coeffs.a;
        coeffs.a * coeffs.t_inhale - k_a * (coeffs.b.powf(s) - 1.0) / coeffs.b.ln() + coeffs.c * s
    };
    v.max(0.0)
}

/// Tidal volume sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TidalVolumeSeries {
    pub timestamps: Vec<f64>,
    pub values: Vec<f64>,
}

impl TidalVolumeSeries {
    pub fn sample(coeffs: &FlowCoefficients, duration: f64, rate_hz: f64) -> Self {
        let n = (duration * rate_hz).floor() as usize + 1;
        let timestamps: Vec<f64> = (0..n).map(|i| i as f64 / rate_hz).collect();
        let values = timestamps.iter().map(|&t| tidal_volume(t, coeffs)).collect();
        Self { timestamps, values }
    }
}
