mod commands;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spinecomp::config::CONFIG_ENV;
use spinecomp::Mode;

#[derive(Debug, Clone, Parser)]
#[command(name = "spinecomp", version, about = "Breathing-compensated vertebra drilling: models, fitting and simulation")]
pub struct Cli {
    /// TOML configuration file. Falls back to $SPINECOMP_CONFIG, then built-in defaults.
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Solve the ventilator flow constants and compare with the literature values.
    SolveVentilator,
    /// Write a synthetic displacement/tidal-volume recording pair.
    Generate(GenerateArgs),
    /// Select a wavelet basis per axis and write the de-noised displacement.
    Denoise(RecordingArgs),
    /// Fit the per-axis linear displacement model with the particle swarm.
    Fit(FitArgs),
    /// Run one drilling trial.
    Simulate(TrialArgs),
    /// Run a batch of trials with seeds seed, seed+1, ...
    Batch(BatchArgs),
    /// Replay a recorded force file through the recognizer.
    Recognize(RecognizeArgs),
    /// Render trace and summary CSVs to SVG figures.
    Plot(PlotArgs),
    /// Re-run a command from its manifest and compare output checksums.
    Rerun(RerunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    /// Recording length (s).
    #[arg(long, default_value_t = 30.0)]
    pub duration: f64,
    /// White-noise standard deviation on every axis (mm).
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct RecordingArgs {
    /// Displacement CSV (t_s,d_ap_mm,d_si_mm,d_lr_mm).
    #[arg(long)]
    pub displacement: PathBuf,
    /// Tidal-volume CSV (t_s,tv_ml).
    #[arg(long)]
    pub tidal: PathBuf,
    /// Use this basis on every axis instead of selecting one.
    #[arg(long)]
    pub basis: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub displacement: PathBuf,
    #[arg(long)]
    pub tidal: PathBuf,
    /// Swarm seed; overrides [pso] seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// De-noise each axis with its selected basis before fitting.
    #[arg(long)]
    pub denoise: bool,
    /// Evaluate the swarm sequentially.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Clone, Args)]
pub struct TrialArgs {
    #[arg(long, value_parser = parse_mode, default_value = "stationary")]
    pub mode: Mode,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Spindle speed (rpm); overrides [plant] spindle_rpm.
    #[arg(long)]
    pub rpm: Option<f64>,
    /// Predict bone motion with a fitted model (fit.json) instead of the physical one.
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BatchArgs {
    #[command(flatten)]
    pub trial: TrialArgs,
    /// Number of trials.
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Run trials one after another instead of in parallel.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Clone, Args)]
pub struct RecognizeArgs {
    /// Force CSV (t_s,force_n), one sample per recognizer step.
    #[arg(long)]
    pub force: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct PlotArgs {
    /// Trial trace CSVs; each becomes a force figure with key points.
    #[arg(long)]
    pub trace: Vec<PathBuf>,
    /// Batch summary CSVs; together they become the residual and success-rate figures.
    #[arg(long)]
    pub summary: Vec<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RerunArgs {
    /// manifest.json of the original run.
    pub manifest: PathBuf,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli, std::env::args().skip(1).collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // Library errors already embed their source in the message.
            let mut msg = e.to_string();
            for cause in e.chain().skip(1) {
                let c = cause.to_string();
                if !msg.contains(&c) {
                    msg = format!("{msg}: {c}");
                }
            }
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
