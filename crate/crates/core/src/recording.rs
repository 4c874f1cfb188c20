//! CSV file formats, recording ingestion and the synthetic recording generator.
//!
//! Every file has a mandatory header row with the exact column names below.
//!
//! | file            | columns                                                            |
//! |-----------------|--------------------------------------------------------------------|
//! | displacement    | `t_s,d_ap_mm,d_si_mm,d_lr_mm`                                      |
//! | tidal volume    | `t_s,tv_ml`                                                        |
//! | force           | `t_s,force_n`                                                      |
//! | decision log    | `index,f_bar,a_star,phase,decision`                                |
//! | trial trace     | `t_s,force_n,bone_pos_mm,tool_pos_mm,depth_mm,f_bar_n,a_star,phase` |
//! | batch summary   | `index,seed,mode,spindle_rpm,stop_depth_mm,residual_mm,success,f_out_n,f_in_n,end_reason` |
//!
//! Floats are written in shortest round-trip form, so reading a written file
//! reproduces the values bit for bit. Empty `a_star` cells mean "not yet
//! calibrated".

use std::fs::File;
use std::io;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::motion_model::{predict_displacement, AxisLine, DisplacementModel, DisplacementSample};
use crate::recognition::{Decision, Phase, StepRecord};
use crate::respiration::{tidal_volume, FlowCoefficients};
use crate::simulator::{TraceRow, TrialResult};

#[derive(Debug, Error)]
pub enum RecordingError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: line {line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },
    #[error("{path}: expected header '{expected}', found '{found}'")]
    Header { path: PathBuf, expected: String, found: String },
    #[error("{path}: line {line}: timestamps must be strictly increasing")]
    NonMonotonic { path: PathBuf, line: u64 },
    #[error("{path}: line {line}: non-finite value")]
    NonFinite { path: PathBuf, line: u64 },
    #[error("{path}: no data rows")]
    Empty { path: PathBuf },
    #[error("displacement and tidal-volume time ranges do not overlap")]
    EmptyOverlap,
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
}

pub const DISPLACEMENT_HEADER: [&str; 4] = ["t_s", "d_ap_mm", "d_si_mm", "d_lr_mm"];
pub const TIDAL_HEADER: [&str; 2] = ["t_s", "tv_ml"];
pub const FORCE_HEADER: [&str; 2] = ["t_s", "force_n"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct DisplacementRow {
    t_s: f64,
    d_ap_mm: f64,
    d_si_mm: f64,
    d_lr_mm: f64,
}

/// One tidal-volume sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TidalSample {
    #[serde(rename = "t_s")]
    pub t: f64,
    #[serde(rename = "tv_ml")]
    pub tv: f64,
}

/// One raw force sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceSample {
    #[serde(rename = "t_s")]
    pub t: f64,
    #[serde(rename = "force_n")]
    pub force: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DecisionRow {
    index: usize,
    f_bar: f64,
    a_star: Option<f64>,
    phase: Phase,
    decision: Decision,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TraceCsvRow {
    t_s: f64,
    force_n: f64,
    bone_pos_mm: f64,
    tool_pos_mm: f64,
    depth_mm: f64,
    f_bar_n: f64,
    a_star: Option<f64>,
    phase: Phase,
}

#[derive(Debug, Clone, Serialize)]
struct SummaryRow<'a> {
    index: usize,
    seed: u64,
    mode: &'a str,
    spindle_rpm: f64,
    stop_depth_mm: f64,
    residual_mm: f64,
    success: bool,
    f_out_n: f64,
    f_in_n: f64,
    end_reason: &'a str,
}

/// One row of a batch summary file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub index: usize,
    pub seed: u64,
    pub mode: String,
    pub spindle_rpm: f64,
    pub stop_depth_mm: f64,
    pub residual_mm: f64,
    pub success: bool,
    pub f_out_n: f64,
    pub f_in_n: f64,
    pub end_reason: String,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> RecordingError + '_ {
    move |source| RecordingError::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> RecordingError + '_ {
    move |source| RecordingError::Csv { path: path.to_path_buf(), source }
}

/// Read all rows, checking the header and reporting the 1-based line of any bad row.
fn read_rows<T: DeserializeOwned>(path: &Path, header: &[&str]) -> Result<Vec<(u64, T)>, RecordingError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file);
    let found = reader.headers().map_err(csv_err(path))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(RecordingError::Header {
            path: path.to_path_buf(),
            expected: header.join(","),
            found: found.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            RecordingError::Parse { path: path.to_path_buf(), line, message: e.to_string() }
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row: T = record.deserialize(Some(&found)).map_err(|e| RecordingError::Parse {
            path: path.to_path_buf(),
            line,
            message: match e.kind() {
                csv::ErrorKind::Deserialize { err, .. } => err.to_string(),
                _ => e.to_string(),
            },
        })?;
        rows.push((line, row));
    }
    if rows.is_empty() {
        return Err(RecordingError::Empty { path: path.to_path_buf() });
    }
    Ok(rows)
}

fn write_rows<T: Serialize>(path: &Path, header: &[&str], rows: impl IntoIterator<Item = T>) -> Result<(), RecordingError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    writer.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        writer.serialize(row).map_err(csv_err(path))?;
    }
    writer.flush().map_err(io_err(path))
}

fn check_series(path: &Path, rows: &[(u64, Vec<f64>)]) -> Result<(), RecordingError> {
    let mut prev = f64::NEG_INFINITY;
    for (line, values) in rows {
        if !values.iter().all(|v| v.is_finite()) {
            return Err(RecordingError::NonFinite { path: path.to_path_buf(), line: *line });
        }
        if !(values[0] > prev) {
            return Err(RecordingError::NonMonotonic { path: path.to_path_buf(), line: *line });
        }
        prev = values[0];
    }
    Ok(())
}

pub fn write_displacement(path: &Path, samples: &[DisplacementSample]) -> Result<(), RecordingError> {
    write_rows(
        path,
        &DISPLACEMENT_HEADER,
        samples.iter().map(|s| DisplacementRow { t_s: s.t, d_ap_mm: s.d_ap, d_si_mm: s.d_si, d_lr_mm: s.d_lr }),
    )
}

pub fn read_displacement(path: &Path) -> Result<Vec<DisplacementSample>, RecordingError> {
    let rows: Vec<(u64, DisplacementRow)> = read_rows(path, &DISPLACEMENT_HEADER)?;
    let values: Vec<(u64, Vec<f64>)> =
        rows.iter().map(|(l, r)| (*l, vec![r.t_s, r.d_ap_mm, r.d_si_mm, r.d_lr_mm])).collect();
    check_series(path, &values)?;
    Ok(rows
        .into_iter()
        .map(|(_, r)| DisplacementSample { t: r.t_s, d_ap: r.d_ap_mm, d_si: r.d_si_mm, d_lr: r.d_lr_mm })
        .collect())
}

pub fn write_tidal(path: &Path, samples: &[TidalSample]) -> Result<(), RecordingError> {
    write_rows(path, &TIDAL_HEADER, samples)
}

pub fn read_tidal(path: &Path) -> Result<Vec<TidalSample>, RecordingError> {
    let rows: Vec<(u64, TidalSample)> = read_rows(path, &TIDAL_HEADER)?;
    let values: Vec<(u64, Vec<f64>)> = rows.iter().map(|(l, r)| (*l, vec![r.t, r.tv])).collect();
    check_series(path, &values)?;
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}

pub fn write_force(path: &Path, samples: &[ForceSample]) -> Result<(), RecordingError> {
    write_rows(path, &FORCE_HEADER, samples)
}

pub fn read_force(path: &Path) -> Result<Vec<ForceSample>, RecordingError> {
    let rows: Vec<(u64, ForceSample)> = read_rows(path, &FORCE_HEADER)?;
    let values: Vec<(u64, Vec<f64>)> = rows.iter().map(|(l, r)| (*l, vec![r.t, r.force])).collect();
    check_series(path, &values)?;
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}

pub fn write_decision_log(path: &Path, records: &[StepRecord]) -> Result<(), RecordingError> {
    write_rows(
        path,
        &["index", "f_bar", "a_star", "phase", "decision"],
        records.iter().map(|r| DecisionRow {
            index: r.index,
            f_bar: r.f_bar,
            a_star: r.a_star,
            phase: r.phase,
            decision: r.decision,
        }),
    )
}

pub const TRACE_HEADER: [&str; 8] =
    ["t_s", "force_n", "bone_pos_mm", "tool_pos_mm", "depth_mm", "f_bar_n", "a_star", "phase"];

pub fn write_trace(path: &Path, trace: &[TraceRow]) -> Result<(), RecordingError> {
    write_rows(
        path,
        &TRACE_HEADER,
        trace.iter().map(|r| TraceCsvRow {
            t_s: r.t,
            force_n: r.force,
            bone_pos_mm: r.bone_pos,
            tool_pos_mm: r.tool_pos,
            depth_mm: r.depth,
            f_bar_n: r.f_bar,
            a_star: r.a_star,
            phase: r.phase,
        }),
    )
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>, RecordingError> {
    let rows: Vec<(u64, TraceCsvRow)> = read_rows(path, &TRACE_HEADER)?;
    Ok(rows
        .into_iter()
        .map(|(_, r)| TraceRow {
            t: r.t_s,
            force: r.force_n,
            bone_pos: r.bone_pos_mm,
            tool_pos: r.tool_pos_mm,
            depth: r.depth_mm,
            f_bar: r.f_bar_n,
            a_star: r.a_star,
            phase: r.phase,
        })
        .collect())
}

pub const SUMMARY_HEADER: [&str; 10] = [
    "index",
    "seed",
    "mode",
    "spindle_rpm",
    "stop_depth_mm",
    "residual_mm",
    "success",
    "f_out_n",
    "f_in_n",
    "end_reason",
];

pub fn write_batch_summary(path: &Path, trials: &[TrialResult]) -> Result<(), RecordingError> {
    write_rows(
        path,
        &SUMMARY_HEADER,
        trials.iter().enumerate().map(|(index, t)| SummaryRow {
            index,
            seed: t.seed,
            mode: t.mode.as_str(),
            spindle_rpm: t.spindle_rpm,
            stop_depth_mm: t.stop_depth,
            residual_mm: t.residual_thickness,
            success: t.success,
            f_out_n: t.f_out,
            f_in_n: t.f_in,
            end_reason: t.end_reason.as_str(),
        }),
    )
}

pub fn read_batch_summary(path: &Path) -> Result<Vec<SummaryRecord>, RecordingError> {
    Ok(read_rows(path, &SUMMARY_HEADER)?.into_iter().map(|(_, r)| r).collect())
}

/// Tidal volume paired with displacement on the displacement time grid.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Aligned {
    pub t: Vec<f64>,
    pub tv: Vec<f64>,
    pub d_ap: Vec<f64>,
    pub d_si: Vec<f64>,
    pub d_lr: Vec<f64>,
    /// Displacement rows outside the tidal-volume time range.
    pub dropped: usize,
}

impl Aligned {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn axes(&self) -> [&[f64]; 3] {
        [&self.d_ap, &self.d_si, &self.d_lr]
    }
}

/// Linearly interpolate tidal volume onto the displacement timestamps.
///
/// Both series must be strictly increasing in time.
pub fn align(displacement: &[DisplacementSample], tidal: &[TidalSample]) -> Result<Aligned, RecordingError> {
    let (Some(first), Some(last)) = (tidal.first(), tidal.last()) else {
        return Err(RecordingError::EmptyOverlap);
    };
    let mut out = Aligned::default();
    for s in displacement {
        if s.t < first.t || s.t > last.t {
            out.dropped += 1;
            continue;
        }
        let j = tidal.partition_point(|v| v.t < s.t);
        let tv = if tidal[j].t == s.t {
            tidal[j].tv
        } else {
            let (a, b) = (&tidal[j - 1], &tidal[j]);
            a.tv + (s.t - a.t) / (b.t - a.t) * (b.tv - a.tv)
        };
        out.t.push(s.t);
        out.tv.push(tv);
        out.d_ap.push(s.d_ap);
        out.d_si.push(s.d_si);
        out.d_lr.push(s.d_lr);
    }
    if out.is_empty() {
        return Err(RecordingError::EmptyOverlap);
    }
    Ok(out)
}

/// Read a displacement file and a tidal-volume file and align them.
pub fn ingest(displacement_csv: &Path, tidal_csv: &Path) -> Result<Aligned, RecordingError> {
    let d = read_displacement(displacement_csv)?;
    let tv = read_tidal(tidal_csv)?;
    align(&d, &tv)
}

/// Parameters of a synthetic breathing recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingSpec {
    /// s
    pub duration: f64,
    /// Displacement sampling rate (Hz).
    pub displacement_rate: f64,
    /// Tidal-volume sampling rate (Hz).
    pub tidal_rate: f64,
    /// Ground-truth displacement model.
    pub model: DisplacementModel,
    /// White-noise standard deviation added to every axis (mm).
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for RecordingSpec {
    /// 30 s at 8 Hz / 64 Hz; about 4 mm AP, 2 mm SI and 1 mm LR at 500 ml.
    fn default() -> Self {
        Self {
            duration: 30.0,
            displacement_rate: 8.0,
            tidal_rate: 64.0,
            model: DisplacementModel {
                ap: AxisLine::new(0.008, 0.5),
                si: AxisLine::new(0.004, -0.3),
                lr: AxisLine::new(0.002, 0.1),
            },
            noise_std: 0.0,
            seed: 0,
        }
    }
}

/// A displacement file and its companion tidal-volume file.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordingFile {
    pub displacement: Vec<DisplacementSample>,
    pub tidal: Vec<TidalSample>,
}

impl RecordingFile {
    pub fn write(&self, displacement_csv: &Path, tidal_csv: &Path) -> Result<(), RecordingError> {
        write_displacement(displacement_csv, &self.displacement)?;
        write_tidal(tidal_csv, &self.tidal)
    }
}

fn grid(duration: f64, rate: f64) -> impl Iterator<Item = f64> {
    let n = (duration * rate).floor() as usize;
    (0..=n).map(move |i| i as f64 / rate)
}

/// Generate a recording from the ventilator tidal volume and a ground-truth model.
pub fn generate_synthetic(spec: &RecordingSpec, coeffs: &FlowCoefficients) -> RecordingFile {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_std.max(0.0)).expect("standard deviation is non-negative");
    let displacement = grid(spec.duration, spec.displacement_rate)
        .map(|t| {
            let d = predict_displacement(tidal_volume(t, coeffs), &spec.model);
            DisplacementSample {
                t,
                d_ap: d.ap + noise.sample(&mut rng),
                d_si: d.si + noise.sample(&mut rng),
                d_lr: d.lr + noise.sample(&mut rng),
            }
        })
        .collect();
    let tidal = grid(spec.duration, spec.tidal_rate).map(|t| TidalSample { t, tv: tidal_volume(t, coeffs) }).collect();
    RecordingFile { displacement, tidal }
}
