//! TOML run configuration.
//!
//! Sections: `[ventilator]`, `[spine]`, `[recognizer]`, `[monitor]`,
//! `[plant]`, `[pso]` and `[signal]`. Every key is optional and falls back
//! to the library default; unknown sections or keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compensation::MonitorConfig;
use crate::fitting::PsoConfig;
use crate::motion_model::{physical_coefficients, SpineGeometry};
use crate::recognition::RecognizerConfig;
use crate::respiration::VentilatorConfig;
use crate::signal::wavelet::SHIPPED_BASES;
use crate::simulator::{BoneModel, Mode, TrialConfig};

/// Environment variable naming the default configuration file.
pub const CONFIG_ENV: &str = "SPINECOMP_CONFIG";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VentilatorSection {
    pub tv_max_ml: f64,
    pub resp_freq_per_min: f64,
    pub ratio_in: f64,
    pub ratio_out: f64,
    pub exhale_peak_factor: f64,
}

impl Default for VentilatorSection {
    fn default() -> Self {
        Self::from(&VentilatorConfig::default())
    }
}

impl From<&VentilatorConfig> for VentilatorSection {
    fn from(v: &VentilatorConfig) -> Self {
        Self {
            tv_max_ml: v.tv_max,
            resp_freq_per_min: v.resp_freq,
            ratio_in: v.ratio_in,
            ratio_out: v.ratio_out,
            exhale_peak_factor: v.exhale_peak_factor,
        }
    }
}

impl VentilatorSection {
    pub fn to_config(&self) -> VentilatorConfig {
        VentilatorConfig {
            tv_max: self.tv_max_ml,
            resp_freq: self.resp_freq_per_min,
            ratio_in: self.ratio_in,
            ratio_out: self.ratio_out,
            exhale_peak_factor: self.exhale_peak_factor,
            ..VentilatorConfig::default()
        }
    }
}

/// Bone layers, force law and trial timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantSection {
    pub outer_cortical_thickness: f64,
    pub cancellous_thickness: f64,
    pub inner_cortical_thickness: f64,
    pub cortical_hardness: f64,
    pub cancellous_hardness: f64,
    pub cancellous_fluctuation: f64,
    pub cortical_fluctuation: f64,
    pub noise_floor: f64,
    pub tip_length: f64,
    pub feed_rate: f64,
    pub spindle_rpm: f64,
    pub tick: f64,
    pub block_size: usize,
    pub monitor_window: usize,
    pub cut_lag: f64,
    pub approach_gap: f64,
    pub segment_period: f64,
    pub max_duration: f64,
}

impl Default for PlantSection {
    fn default() -> Self {
        let b = BoneModel::default();
        let t = TrialConfig::default();
        Self {
            outer_cortical_thickness: b.outer_cortical_thickness,
            cancellous_thickness: b.cancellous_thickness,
            inner_cortical_thickness: b.inner_cortical_thickness,
            cortical_hardness: b.cortical_hardness,
            cancellous_hardness: b.cancellous_hardness,
            cancellous_fluctuation: b.cancellous_fluctuation,
            cortical_fluctuation: b.cortical_fluctuation,
            noise_floor: b.noise_floor,
            tip_length: b.tip_length,
            feed_rate: t.feed_rate,
            spindle_rpm: t.spindle_rpm,
            tick: t.tick,
            block_size: t.block_size,
            monitor_window: t.monitor_window,
            cut_lag: t.cut_lag,
            approach_gap: t.approach_gap,
            segment_period: t.segment_period,
            max_duration: t.max_duration,
        }
    }
}

impl PlantSection {
    pub fn bone(&self) -> BoneModel {
        BoneModel {
            outer_cortical_thickness: self.outer_cortical_thickness,
            cancellous_thickness: self.cancellous_thickness,
            inner_cortical_thickness: self.inner_cortical_thickness,
            cortical_hardness: self.cortical_hardness,
            cancellous_hardness: self.cancellous_hardness,
            cancellous_fluctuation: self.cancellous_fluctuation,
            cortical_fluctuation: self.cortical_fluctuation,
            noise_floor: self.noise_floor,
            tip_length: self.tip_length,
        }
    }
}

/// Wavelet basis selection settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalSection {
    pub candidates: Vec<String>,
    pub weights: [f64; 3],
}

impl Default for SignalSection {
    fn default() -> Self {
        Self { candidates: SHIPPED_BASES.iter().map(|s| s.to_string()).collect(), weights: [1.0 / 3.0; 3] }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub ventilator: VentilatorSection,
    pub spine: SpineGeometry,
    pub recognizer: RecognizerConfig,
    pub monitor: MonitorConfig,
    pub plant: PlantSection,
    pub pso: PsoConfig,
    pub signal: SignalSection,
}

impl Config {
    pub fn parse(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(text)
            .map_err(|e| ConfigError::Parse { path: origin.to_path_buf(), message: e.message().to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text, path)
    }

    /// Load `path`, else the file named by `SPINECOMP_CONFIG`, else defaults.
    /// Returns the path actually used.
    pub fn resolve(path: Option<&Path>) -> Result<(Self, Option<PathBuf>), ConfigError> {
        let chosen = path.map(Path::to_path_buf).or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
        match chosen {
            Some(p) => Ok((Self::load(&p)?, Some(p))),
            None => Ok((Self::default(), None)),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        self.ventilator.to_config().validate().map_err(|e| invalid(&e))?;
        self.spine.validate().map_err(|e| invalid(&e))?;
        self.recognizer.validate().map_err(|e| invalid(&e))?;
        self.monitor.validate().map_err(|e| invalid(&e))?;
        self.pso.validate().map_err(|e| invalid(&e))?;
        self.trial(Mode::Stationary, 0).validate().map_err(|e| invalid(&e))?;
        if self.signal.candidates.is_empty() {
            return Err(ConfigError::Invalid("[signal] candidates must not be empty".into()));
        }
        Ok(())
    }

    pub fn ventilator(&self) -> VentilatorConfig {
        self.ventilator.to_config()
    }

    /// Trial settings for `mode`, predicting with the physical displacement model.
    pub fn trial(&self, mode: Mode, seed: u64) -> TrialConfig {
        let p = &self.plant;
        TrialConfig {
            mode,
            feed_rate: p.feed_rate,
            spindle_rpm: p.spindle_rpm,
            tick: p.tick,
            block_size: p.block_size,
            monitor_window: p.monitor_window,
            cut_lag: p.cut_lag,
            approach_gap: p.approach_gap,
            segment_period: p.segment_period,
            max_duration: p.max_duration,
            ventilator: self.ventilator(),
            model: physical_coefficients(&self.spine),
            recognizer: self.recognizer.clone(),
            monitor: self.monitor.clone(),
            bone: p.bone(),
            seed,
            ..TrialConfig::default()
        }
    }
}
