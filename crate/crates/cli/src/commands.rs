use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::Parser;
use serde_json::{json, Value};
use spinecomp::config::Config;
use spinecomp::fitting::{fit_model, pair};
use spinecomp::manifest::{RunManifest, MANIFEST_FILE};
use spinecomp::recording::{
    generate_synthetic, ingest, read_force, write_batch_summary, write_decision_log, write_displacement, write_trace,
    RecordingSpec,
};
use spinecomp::respiration::{VentilatorConfig, LITERATURE_B, LITERATURE_C};
use spinecomp::signal::{denoise, select_basis, WaveletBasis};
use spinecomp::{
    fit_ols, r_squared, run_batch, run_trial, solve_flow_coefficients, DisplacementModel, DisplacementSample, Execution,
    FlowCoefficients, Recognizer, TrialConfig,
};

use crate::{BatchArgs, Cli, Command, FitArgs, GenerateArgs, PlotArgs, RecognizeArgs, RecordingArgs, RerunArgs, TrialArgs};

const CONFIG_SNAPSHOT: &str = "config.toml";

/// Output directory plus the manifest being assembled for it.
struct Run {
    dir: PathBuf,
    manifest: RunManifest,
}

impl Run {
    fn start(cli: &Cli, name: &str, args: Vec<String>, config: &Config, seed: Option<u64>) -> Result<Self> {
        fs::create_dir_all(&cli.out).with_context(|| format!("cannot create output directory {}", cli.out.display()))?;
        let mut manifest = RunManifest::new(name, args, &cli.out);
        manifest.config_path = cli.config.as_ref().map(|p| p.display().to_string());
        manifest.seed = seed;
        let mut run = Self { dir: cli.out.clone(), manifest };
        run.write_text(CONFIG_SNAPSHOT, &config.to_toml())?;
        run.manifest.config_snapshot = Some(CONFIG_SNAPSHOT.to_string());
        Ok(run)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn record(&mut self, name: &str) -> Result<()> {
        self.manifest.add_artifact(&self.dir, name)?;
        Ok(())
    }

    fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.path(name);
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
        self.record(name)
    }

    fn write_json(&mut self, name: &str, value: &Value) -> Result<()> {
        self.write_text(name, &(serde_json::to_string_pretty(value)? + "\n"))
    }

    fn finish(self) -> Result<PathBuf> {
        let path = self.manifest.write(&self.dir)?;
        println!("wrote {}", path.display());
        Ok(path)
    }
}

fn command_name(command: &Command) -> &'static str {
    match command {
        Command::SolveVentilator => "solve-ventilator",
        Command::Generate(_) => "generate",
        Command::Denoise(_) => "denoise",
        Command::Fit(_) => "fit",
        Command::Simulate(_) => "simulate",
        Command::Batch(_) => "batch",
        Command::Recognize(_) => "recognize",
        Command::Plot(_) => "plot",
        Command::Rerun(_) => "rerun",
    }
}

pub fn run(cli: &Cli, args: Vec<String>) -> Result<()> {
    if let Command::Rerun(r) = &cli.command {
        return rerun(cli, r);
    }
    let (config, _) = Config::resolve(cli.config.as_deref())?;
    let name = command_name(&cli.command);
    match &cli.command {
        Command::SolveVentilator => solve_ventilator(Run::start(cli, name, args, &config, None)?, &config),
        Command::Generate(g) => generate(Run::start(cli, name, args, &config, Some(g.seed))?, &config, g),
        Command::Denoise(d) => denoise_cmd(Run::start(cli, name, args, &config, None)?, &config, d),
        Command::Fit(f) => {
            let seed = f.seed.unwrap_or(config.pso.seed);
            fit(Run::start(cli, name, args, &config, Some(seed))?, &config, f, seed)
        }
        Command::Simulate(t) => simulate(Run::start(cli, name, args, &config, Some(t.seed))?, &config, t),
        Command::Batch(b) => batch(Run::start(cli, name, args, &config, Some(b.trial.seed))?, &config, b),
        Command::Recognize(r) => recognize(Run::start(cli, name, args, &config, None)?, &config, r),
        Command::Plot(p) => plot(Run::start(cli, name, args, &config, None)?, p),
        Command::Rerun(_) => unreachable!(),
    }
}

fn solve(cfg: &VentilatorConfig) -> Result<FlowCoefficients> {
    Ok(solve_flow_coefficients(cfg, 1e-10).context("ventilator constants did not solve")?.coefficients)
}

fn solve_ventilator(mut run: Run, config: &Config) -> Result<()> {
    let cfg = config.ventilator();
    let sol = solve_flow_coefficients(&cfg, 1e-10).context("ventilator constants did not solve")?;
    let c = sol.coefficients;
    let lit = FlowCoefficients::with_exhale(&cfg, LITERATURE_B, LITERATURE_C);
    let operating_room = match solve_flow_coefficients(&VentilatorConfig::operating_room(), 1e-10) {
        Ok(s) => json!({ "solved": true, "b": s.coefficients.b, "c": s.coefficients.c, "residuals": s.residuals }),
        Err(e) => json!({ "solved": false, "error": e.to_string() }),
    };
    let report = json!({
        "a": c.a,
        "b": c.b,
        "c": c.c,
        "t_inhale": c.t_inhale,
        "period": c.period,
        "exhale_peak_factor": c.exhale_peak_factor,
        "residuals": sol.residuals,
        "iterations": sol.iterations,
        "literature": {
            "b": LITERATURE_B,
            "c": LITERATURE_C,
            "residuals": lit.residuals(),
            "relative_difference_b": (c.b - LITERATURE_B) / LITERATURE_B,
            "relative_difference_c": (c.c - LITERATURE_C) / LITERATURE_C,
        },
        "peak_factor_1_5": operating_room,
    });
    println!("a = {} ml/s, b = {:.10}, c = {:.10} ml/s, residuals = [{:.2e}, {:.2e}]", c.a, c.b, c.c, sol.residuals[0], sol.residuals[1]);
    println!("literature (b, c) = ({LITERATURE_B}, {LITERATURE_C}) leaves residuals {:?}", lit.residuals());
    run.write_json("ventilator.json", &report)?;
    run.finish()?;
    Ok(())
}

fn generate(mut run: Run, config: &Config, g: &GenerateArgs) -> Result<()> {
    ensure!(g.duration > 0.0, "--duration must be > 0");
    ensure!(g.noise >= 0.0, "--noise must be >= 0");
    let spec = RecordingSpec { duration: g.duration, noise_std: g.noise, seed: g.seed, ..RecordingSpec::default() };
    let rec = generate_synthetic(&spec, &solve(&config.ventilator())?);
    rec.write(&run.path("displacement.csv"), &run.path("tidal.csv"))?;
    run.record("displacement.csv")?;
    run.record("tidal.csv")?;
    run.write_json("recording.json", &serde_json::to_value(&spec)?)?;
    println!("{} displacement rows, {} tidal-volume rows", rec.displacement.len(), rec.tidal.len());
    run.finish()?;
    Ok(())
}

fn candidates(config: &Config, forced: Option<&str>) -> Result<Vec<WaveletBasis>> {
    let names: Vec<&str> = match forced {
        Some(b) => vec![b],
        None => config.signal.candidates.iter().map(String::as_str).collect(),
    };
    names.into_iter().map(|n| WaveletBasis::by_name(n).map_err(Into::into)).collect()
}

const AXES: [&str; 3] = ["ap", "si", "lr"];

/// Per-axis basis selection; returns the de-noised axes and the reports.
fn denoise_axes(axes: [&[f64]; 3], tv: &[f64], config: &Config, forced: Option<&str>) -> Result<([Vec<f64>; 3], Value)> {
    let bases = candidates(config, forced)?;
    let mut out: [Vec<f64>; 3] = Default::default();
    let mut reports = serde_json::Map::new();
    for ((name, axis), slot) in AXES.iter().zip(axes).zip(out.iter_mut()) {
        let report = select_basis(axis, tv, &bases, config.signal.weights, Execution::default())
            .with_context(|| format!("basis selection failed on {name}"))?;
        *slot = denoise(axis, &bases[report.best])?;
        println!("{name}: {}", report.best_name());
        reports.insert(name.to_string(), serde_json::to_value(&report)?);
    }
    Ok((out, Value::Object(reports)))
}

fn denoise_cmd(mut run: Run, config: &Config, d: &RecordingArgs) -> Result<()> {
    let aligned = ingest(&d.displacement, &d.tidal)?;
    let ([ap, si, lr], reports) = denoise_axes(aligned.axes(), &aligned.tv, config, d.basis.as_deref())?;
    let samples: Vec<DisplacementSample> = (0..aligned.len())
        .map(|i| DisplacementSample { t: aligned.t[i], d_ap: ap[i], d_si: si[i], d_lr: lr[i] })
        .collect();
    write_displacement(&run.path("denoised.csv"), &samples)?;
    run.record("denoised.csv")?;
    run.write_json("selection.json", &json!({ "rows": aligned.len(), "dropped": aligned.dropped, "axes": reports }))?;
    run.finish()?;
    Ok(())
}

fn fit(mut run: Run, config: &Config, f: &FitArgs, seed: u64) -> Result<()> {
    let aligned = ingest(&f.displacement, &f.tidal)?;
    println!("{} aligned rows ({} dropped)", aligned.len(), aligned.dropped);
    let (denoised, selection) = if f.denoise {
        let (axes, reports) = denoise_axes(aligned.axes(), &aligned.tv, config, None)?;
        (Some(axes), reports)
    } else {
        (None, Value::Null)
    };
    let axes: [&[f64]; 3] = match &denoised {
        Some([a, s, l]) => [a, s, l],
        None => aligned.axes(),
    };
    let exec = if f.sequential { Execution::Sequential } else { Execution::default() };
    let pso = spinecomp::PsoConfig { seed, ..config.pso.clone() };
    let fitted = fit_model(&aligned.tv, axes, &pso, exec)?;
    let mut per_axis = serde_json::Map::new();
    for ((name, axis), result) in AXES.iter().zip(axes).zip([&fitted.ap, &fitted.si, &fitted.lr]) {
        let data = pair(&aligned.tv, axis)?;
        let ols = fit_ols(&data)?;
        let r2_ols = r_squared(ols, &data)?;
        println!("{name}: q1 = {:.6} mm/ml, q0 = {:.4} mm, R2 = {:.6} (least squares {:.6})", result.q1, result.q0, result.r2, r2_ols);
        per_axis.insert(
            name.to_string(),
            json!({
                "q1": result.q1,
                "q0": result.q0,
                "r2": result.r2,
                "r2_ols": r2_ols,
                "q1_ols": ols.0,
                "q0_ols": ols.1,
                "iterations_used": result.iterations_used,
            }),
        );
    }
    run.write_json(
        "fit.json",
        &json!({
            "model": fitted.model(),
            "axes": per_axis,
            "rows": aligned.len(),
            "dropped": aligned.dropped,
            "denoised": f.denoise,
            "selection": selection,
        }),
    )?;
    run.finish()?;
    Ok(())
}

fn trial_config(config: &Config, t: &TrialArgs) -> Result<TrialConfig> {
    let mut cfg = config.trial(t.mode, t.seed);
    if let Some(rpm) = t.rpm {
        cfg.spindle_rpm = rpm;
    }
    if let Some(path) = &t.model {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let value: Value = serde_json::from_str(&text).with_context(|| format!("{} is not JSON", path.display()))?;
        let model: DisplacementModel = serde_json::from_value(value.get("model").cloned().unwrap_or(Value::Null))
            .with_context(|| format!("{} has no usable \"model\" entry", path.display()))?;
        cfg.model = model;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn simulate(mut run: Run, config: &Config, t: &TrialArgs) -> Result<()> {
    let cfg = trial_config(config, t)?;
    let mut result = run_trial(&cfg)?;
    write_trace(&run.path("trace.csv"), &result.trace)?;
    run.record("trace.csv")?;
    result.trace.clear();
    println!(
        "{}: {} at {:.3} s, depth {:.3} mm, residual {:.3} mm, success {}",
        cfg.mode.as_str(),
        result.end_reason.as_str(),
        result.end_time,
        result.stop_depth,
        result.residual_thickness,
        result.success
    );
    run.write_json("result.json", &serde_json::to_value(&result)?)?;
    run.finish()?;
    Ok(())
}

fn batch(mut run: Run, config: &Config, b: &BatchArgs) -> Result<()> {
    ensure!(b.n >= 1, "--n must be at least 1");
    let cfg = TrialConfig { record_trace: false, ..trial_config(config, &b.trial)? };
    let exec = if b.sequential { Execution::Sequential } else { Execution::default() };
    let summary = run_batch(b.n, &cfg, exec)?;
    write_batch_summary(&run.path("summary.csv"), &summary.trials)?;
    run.record("summary.csv")?;
    let mut reasons: BTreeMap<&str, usize> = BTreeMap::new();
    for t in &summary.trials {
        *reasons.entry(t.end_reason.as_str()).or_default() += 1;
    }
    println!(
        "{} x{} at {} rpm: success {:.2}, median f_out {:.3} N, median f_in {:.3} N, median residual {}",
        cfg.mode.as_str(),
        summary.n,
        cfg.spindle_rpm,
        summary.success_rate,
        summary.median_f_out,
        summary.median_f_in,
        summary.median_residual_success.map_or("n/a".to_string(), |r| format!("{r:.3} mm")),
    );
    run.write_json(
        "aggregate.json",
        &json!({
            "mode": cfg.mode.as_str(),
            "spindle_rpm": cfg.spindle_rpm,
            "n": summary.n,
            "base_seed": summary.base_seed,
            "success_rate": summary.success_rate,
            "median_f_out": summary.median_f_out,
            "median_f_in": summary.median_f_in,
            "median_residual_success": summary.median_residual_success,
            "end_reasons": reasons,
        }),
    )?;
    run.finish()?;
    Ok(())
}

fn recognize(mut run: Run, config: &Config, r: &RecognizeArgs) -> Result<()> {
    let samples = read_force(&r.force)?;
    let mut recognizer = Recognizer::new(config.recognizer.clone())?;
    let mut records = Vec::new();
    for s in &samples {
        let rec = recognizer.push(s.force);
        records.push(rec);
        if rec.decision != spinecomp::Decision::Continue {
            break;
        }
    }
    write_decision_log(&run.path("decisions.csv"), &records)?;
    run.record("decisions.csv")?;
    let last = records.last().copied();
    let stop = last.filter(|r| r.decision == spinecomp::Decision::Stop).map(|r| r.index);
    let state = recognizer.state();
    println!(
        "{} samples read, final phase {}, stop {}",
        samples.len(),
        recognizer.phase(),
        stop.map_or("none".to_string(), |i| format!("at sample {i} (t = {} s)", samples[i].t))
    );
    run.write_json(
        "recognition.json",
        &json!({
            "samples": samples.len(),
            "processed": records.len(),
            "phase": recognizer.phase(),
            "stop_index": stop,
            "stop_time": stop.map(|i| samples[i].t),
            "last_key_point": state.last_key_point,
            "calibration": state.calibration,
            "fail_reason": state.fail_reason,
        }),
    )?;
    run.finish()?;
    Ok(())
}

fn plot(mut run: Run, p: &PlotArgs) -> Result<()> {
    if p.trace.is_empty() && p.summary.is_empty() {
        bail!("nothing to plot: pass --trace and/or --summary");
    }
    for (i, path) in p.trace.iter().enumerate() {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("trace");
        let name = format!("force_{i}_{stem}.svg");
        crate::plot::force_trace(path, &run.path(&name))?;
        run.record(&name)?;
    }
    if !p.summary.is_empty() {
        crate::plot::residuals(&p.summary, &run.path("residual.svg"))?;
        run.record("residual.svg")?;
        crate::plot::success_rates(&p.summary, &run.path("success.svg"))?;
        run.record("success.svg")?;
    }
    run.finish()?;
    Ok(())
}

fn rerun(cli: &Cli, r: &RerunArgs) -> Result<()> {
    let original = RunManifest::read(&r.manifest)?;
    let base = r.manifest.parent().unwrap_or(Path::new("."));
    ensure!(original.command != "rerun", "cannot rerun a rerun manifest");
    if base.canonicalize().ok() == cli.out.canonicalize().ok() {
        bail!("--out must differ from the original output directory {}", base.display());
    }

    let mut argv = vec!["spinecomp".to_string()];
    argv.extend(original.args.iter().cloned());
    let mut replay = Cli::try_parse_from(&argv).context("manifest arguments no longer parse")?;
    replay.out = cli.out.clone();
    replay.config = original.config_snapshot.as_ref().map(|s| base.join(s));
    run(&replay, original.args.clone())?;

    let mismatched = original.mismatches(&cli.out);
    for a in &original.artifacts {
        let state = if mismatched.contains(&a.path) { "DIFFERS" } else { "identical" };
        println!("{state:9} {}", a.path);
    }
    ensure!(mismatched.is_empty(), "{} of {} artifacts differ from {}", mismatched.len(), original.artifacts.len(), r.manifest.display());
    println!("all {} artifacts identical ({} in {})", original.artifacts.len(), MANIFEST_FILE, cli.out.display());
    Ok(())
}
