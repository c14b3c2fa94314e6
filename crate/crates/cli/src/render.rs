//! Human-readable rendering of the JSON reports.

use std::path::Path;

use anyhow::{bail, Context, Result};
use etadrc_core::analysis::{McSummary, ScalingReport};
use etadrc_core::analysis::windowed_mean;

use crate::manifest::RunManifest;

pub fn print_scaling(report: &ScalingReport) {
    println!(
        "gain sweep: {} paths per gain, window from t = {}",
        report.n_paths, report.window_start
    );
    println!(
        "{:>8} {:>10} {:>13} {:>13} {:>13} {:>13} {:>9} {:>9}",
        "r", "h", "mse_e1", "mse_e2", "mse_e3+", "sum E|x|^2", "eso", "ctrl"
    );
    for run in &report.runs {
        if let Some(err) = &run.error {
            println!("{:>8} failed: {err}", run.r);
            continue;
        }
        let mse = &run.windowed_mse_err;
        let tail: f64 = mse[2..].iter().sum();
        println!(
            "{:>8} {:>10.2e} {:>13.4e} {:>13.4e} {:>13.4e} {:>13.4e} {:>9.0} {:>9.0}",
            run.r,
            run.h,
            mse[0],
            mse[1],
            tail,
            run.windowed_msq_state_sum,
            run.eso_count_mean,
            run.ctrl_count_mean
        );
    }
    let slopes: Vec<String> = report
        .slopes
        .iter()
        .map(|s| s.map(|v| format!("{v:.2}")).unwrap_or_else(|| "n/a".into()))
        .collect();
    println!("log-log slopes per error state: {}", slopes.join(", "));
    println!(
        "per-state MSE strictly decreasing: {:?}; ordering at largest gain: {}; state sum decreasing: {}",
        report.mse_strictly_decreasing, report.ordering_at_largest_r, report.state_sum_strictly_decreasing
    );
}

pub fn print_mc(summary: &McSummary) {
    println!(
        "ensemble of {} paths, window from t = {}",
        summary.n_paths, summary.window_start
    );
    println!(
        "events: transmissions {:.0} (min {} max {}), control updates {:.0} (min {} max {})",
        summary.eso_counts.mean,
        summary.eso_counts.min,
        summary.eso_counts.max,
        summary.ctrl_counts.mean,
        summary.ctrl_counts.min,
        summary.ctrl_counts.max
    );
    println!("{:>7} {:>13} {:>13} {:>13}", "state", "win mse", "sup med", "sup p90");
    for (i, q) in summary.sup_err.iter().enumerate() {
        let wm = windowed_mean(&summary.time, &summary.mse_err[i], summary.window_start);
        println!("{:>7} {:>13.4e} {:>13.4e} {:>13.4e}", format!("e{}", i + 1), wm, q.median, q.p90);
    }
}

fn print_manifest(m: &RunManifest) {
    println!("command:     {} (tool v{})", m.command, m.tool_version);
    println!("status:      {}{}", m.status, match m.divergence_time {
        Some(t) => format!(" (diverged at t = {t})"),
        None => String::new(),
    });
    println!("system:      {}", m.config.system);
    println!("seed:        {} ({} streams)", m.seed, m.stream_ids.len());
    if let Some(r) = &m.r_values {
        println!("gains swept: {r:?}");
    }
    if let Some(n) = m.mc_paths {
        println!("paths:       {n}");
    }
    if let Some(w) = m.window_start {
        println!("window from: {w}");
    }
    println!("outputs:     {}", m.outputs.join(", "));
    println!("validation:  sha256 {}", m.validation_digest);
}

/// Renders any of the tool's JSON artifacts as a table, detecting the kind
/// from its fields.
pub fn render(path: &Path) -> Result<()> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if let Ok(m) = serde_json::from_str::<RunManifest>(&text) {
        print_manifest(&m);
        return Ok(());
    }
    if let Ok(s) = serde_json::from_str::<ScalingReport>(&text) {
        print_scaling(&s);
        return Ok(());
    }
    if let Ok(s) = serde_json::from_str::<McSummary>(&text) {
        print_mc(&s);
        return Ok(());
    }
    bail!("{} is not a manifest, scaling report, or ensemble summary", path.display())
}
