use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, ensure, Result};
use plotters::prelude::*;
use spinecomp::recording::{read_batch_summary, read_trace, SummaryRecord};

fn draw_err<E: std::fmt::Debug>(e: E) -> anyhow::Error {
    anyhow!("plot failed: {e:?}")
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo.is_finite() && hi > lo {
        (lo, hi)
    } else {
        (0.0, 1.0)
    }
}

/// Block force and its moving average, with a marker wherever the phase changes.
pub fn force_trace(trace: &Path, out: &Path) -> Result<()> {
    let rows = read_trace(trace)?;
    ensure!(!rows.is_empty(), "{} has no rows", trace.display());
    let (t0, t1) = span(rows.iter().map(|r| r.t));
    let (_, f1) = span(rows.iter().flat_map(|r| [r.force, r.f_bar]));

    let root = SVGBackend::new(out, (960, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(draw_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(format!("Thrust force: {}", trace.display()), ("sans-serif", 18))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(t0..t1, 0.0..f1 * 1.1)
        .map_err(draw_err)?;
    chart.configure_mesh().x_desc("time (s)").y_desc("force (N)").draw().map_err(draw_err)?;
    chart
        .draw_series(LineSeries::new(rows.iter().map(|r| (r.t, r.force)), RGBColor(160, 160, 160)))
        .map_err(draw_err)?
        .label("block mean");
    chart
        .draw_series(LineSeries::new(rows.iter().map(|r| (r.t, r.f_bar)), BLUE.stroke_width(2)))
        .map_err(draw_err)?
        .label("moving average");

    let changes: Vec<_> = rows.windows(2).filter(|w| w[0].phase != w[1].phase).map(|w| &w[1]).collect();
    chart
        .draw_series(changes.iter().map(|r| Circle::new((r.t, r.f_bar), 5, RED.filled())))
        .map_err(draw_err)?;
    chart
        .draw_series(changes.iter().map(|r| {
            Text::new(r.phase.as_str().to_string(), (r.t, r.f_bar + 0.04 * f1), ("sans-serif", 12).into_font())
        }))
        .map_err(draw_err)?;
    chart.configure_series_labels().border_style(BLACK).draw().map_err(draw_err)?;
    root.present().map_err(draw_err)?;
    Ok(())
}

fn load(summaries: &[PathBuf]) -> Result<Vec<SummaryRecord>> {
    let mut all = Vec::new();
    for p in summaries {
        all.extend(read_batch_summary(p)?);
    }
    Ok(all)
}

/// One bar per successful trial: residual inner-cortical thickness.
pub fn residuals(summaries: &[PathBuf], out: &Path) -> Result<()> {
    let rows: Vec<SummaryRecord> = load(summaries)?.into_iter().filter(|r| r.success).collect();
    let root = SVGBackend::new(out, (960, 420)).into_drawing_area();
    root.fill(&WHITE).map_err(draw_err)?;
    let top = rows.iter().map(|r| r.residual_mm).fold(2.0, f64::max);
    let n = rows.len().max(1);
    let mut chart = ChartBuilder::on(&root)
        .caption("Residual thickness of successful trials", ("sans-serif", 18))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(0.0..n as f64, 0.0..top * 1.1)
        .map_err(draw_err)?;
    chart.configure_mesh().x_desc("trial").y_desc("residual (mm)").draw().map_err(draw_err)?;
    chart
        .draw_series(
            rows.iter()
                .enumerate()
                .map(|(i, r)| Rectangle::new([(i as f64 + 0.1, 0.0), (i as f64 + 0.9, r.residual_mm)], BLUE.filled())),
        )
        .map_err(draw_err)?;
    root.present().map_err(draw_err)?;
    Ok(())
}

/// Success rate per (mode, spindle speed) group.
pub fn success_rates(summaries: &[PathBuf], out: &Path) -> Result<()> {
    let mut groups: BTreeMap<(String, u64), (usize, usize)> = BTreeMap::new();
    for r in load(summaries)? {
        let g = groups.entry((r.mode.clone(), r.spindle_rpm.round() as u64)).or_default();
        g.0 += usize::from(r.success);
        g.1 += 1;
    }
    let bars: Vec<(String, f64)> =
        groups.into_iter().map(|((mode, rpm), (ok, n))| (format!("{mode} {rpm}"), ok as f64 / n as f64)).collect();

    let root = SVGBackend::new(out, (960, 420)).into_drawing_area();
    root.fill(&WHITE).map_err(draw_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption("Recognition success rate", ("sans-serif", 18))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(0.0..bars.len().max(1) as f64, 0.0..1.05)
        .map_err(draw_err)?;
    chart.configure_mesh().disable_x_mesh().x_labels(0).y_desc("success rate").draw().map_err(draw_err)?;
    chart
        .draw_series(
            bars.iter()
                .enumerate()
                .map(|(i, (_, rate))| Rectangle::new([(i as f64 + 0.15, 0.0), (i as f64 + 0.85, *rate)], GREEN.filled())),
        )
        .map_err(draw_err)?;
    chart
        .draw_series(bars.iter().enumerate().map(|(i, (label, rate))| {
            Text::new(format!("{label}: {rate:.2}"), (i as f64 + 0.15, (rate + 0.02).min(1.0)), ("sans-serif", 12).into_font())
        }))
        .map_err(draw_err)?;
    root.present().map_err(draw_err)?;
    Ok(())
}
