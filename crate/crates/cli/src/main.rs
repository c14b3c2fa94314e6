//! Command-line front end: config ingestion, dispatch, result emission.
//!
//! Commands: `validate`, `simulate`, `sweep`, `mc`, `report`. Configs are
//! either shipped preset names (`paper-sec5`, `linear-n2`, `silent`) or TOML
//! files with the same structure; unknown keys are hard errors. Every run
//! directory receives a manifest sufficient for byte-exact replay via
//! `--from-manifest`.

mod manifest;
mod render;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use etadrc_core::analysis::{mc_summary, scaling_study, write_mc_curves_csv};
use etadrc_core::config::RunConfig;
use etadrc_core::error::Error as CoreError;
use etadrc_core::gains::validate_design;
use etadrc_core::simulator::{
    run_ensemble, run_trajectory, write_events_jsonl, write_trajectory_csv, SimConfig,
};

use manifest::RunManifest;

#[derive(Parser)]
#[command(name = "etadrc", version, about = "Event-triggered ADRC simulation laboratory")]
struct Cli {
    /// Worker threads for ensemble runs (default: machine parallelism).
    /// Results are deterministic either way.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a gain design against the closed-loop requirements.
    Validate {
        /// Preset name or path to a TOML config.
        #[arg(long)]
        config: String,
    },
    /// Run one closed-loop trajectory; writes trajectory.csv, events.jsonl,
    /// manifest.json.
    Simulate {
        #[arg(long, conflicts_with = "from_manifest")]
        config: Option<String>,
        /// Replay an earlier run from its manifest (byte-identical outputs).
        #[arg(long)]
        from_manifest: Option<PathBuf>,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Run even if the design validation fails.
        #[arg(long)]
        force: bool,
    },
    /// Gain-scaling study: rerun the ensemble at each gain, fit log-log
    /// slopes, report monotonicity verdicts.
    Sweep {
        #[arg(long, conflicts_with = "from_manifest")]
        config: Option<String>,
        #[arg(long)]
        from_manifest: Option<PathBuf>,
        /// Comma-separated gains, strictly increasing (at least two).
        #[arg(long, value_delimiter = ',')]
        r: Vec<f64>,
        /// Trajectories per gain.
        #[arg(long, default_value_t = 200)]
        mc: usize,
        /// Measurement window start (default: last 25% of the horizon).
        #[arg(long)]
        window_start: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Monte Carlo ensemble summary at the configured gain.
    Mc {
        #[arg(long, conflicts_with = "from_manifest")]
        config: Option<String>,
        #[arg(long)]
        from_manifest: Option<PathBuf>,
        /// Number of trajectories.
        #[arg(long, default_value_t = 100)]
        mc: usize,
        #[arg(long)]
        window_start: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Re-render a JSON report (manifest, scaling report, ensemble summary)
    /// as a human-readable table.
    Report { path: PathBuf },
}

fn main() {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    let code = match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    };
    std::process::exit(code);
}

/// Loads a config by preset name or TOML path. Parse failures surface the
/// line/column and offending key from the TOML parser.
fn load_config(spec: &str) -> Result<RunConfig> {
    if let Some(preset) = RunConfig::preset(spec) {
        return Ok(preset);
    }
    let path = Path::new(spec);
    if !path.exists() {
        bail!(
            "'{spec}' is neither a preset ({}) nor an existing config file",
            RunConfig::preset_names().join(", ")
        );
    }
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("ETADRC_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"))
}

fn print_validation(report: &etadrc_core::gains::ValidationReport) {
    let verdict = |ok: bool| if ok { "PASS" } else { "FAIL" };
    println!("{:<16} {:<6} detail", "check", "result");
    println!("{:<16} {:<6}", "H Hurwitz", verdict(report.h_hurwitz));
    println!("{:<16} {:<6}", "J Hurwitz", verdict(report.j_hurwitz));
    match report.theta_threshold {
        Some(thr) => println!(
            "{:<16} {:<6} theta = {} vs threshold {}",
            "theta",
            verdict(report.theta_ok),
            report.theta,
            thr
        ),
        None => println!("{:<16} {:<6} no threshold (J not Hurwitz)", "theta", "FAIL"),
    }
    println!(
        "{:<16} {:<6} {} (< 1 required; tau = {}, upsilon = {})",
        "dwell product",
        verdict(report.dwell_ok),
        report.dwell_product,
        report.tau,
        report.upsilon
    );
}

struct ResolvedRun {
    config: RunConfig,
    sim: SimConfig,
    seed: u64,
}

fn resolve(config: Option<String>, seed: Option<u64>) -> Result<ResolvedRun> {
    let spec = config.context("--config is required (or use --from-manifest)")?;
    let mut config = load_config(&spec)?;
    if let Some(s) = seed {
        config.sim.seed = s;
    }
    let sim = config.to_sim_config()?;
    let seed = config.sim.seed;
    Ok(ResolvedRun { config, sim, seed })
}

fn resolve_from_manifest(path: &Path, command: &str) -> Result<(RunManifest, ResolvedRun)> {
    let m = RunManifest::read(path)?;
    if m.command != command {
        bail!("manifest at {} was written by '{}', not '{command}'", path.display(), m.command);
    }
    let mut config = m.config.clone();
    config.sim.seed = m.seed;
    let sim = config.to_sim_config()?;
    let run = ResolvedRun { config, sim, seed: m.seed };
    Ok((m, run))
}

fn run(command: Command) -> Result<i32> {
    match command {
        Command::Validate { config } => {
            let run = resolve(Some(config), None)?;
            let report = validate_design(&run.sim.design, &run.sim.system)?;
            print_validation(&report);
            Ok(if report.all_pass() { 0 } else { 1 })
        }
        Command::Simulate { config, from_manifest, seed, out_dir: dir, force } => {
            let (_, mut run) = match &from_manifest {
                Some(path) => {
                    let (m, run) = resolve_from_manifest(path, "simulate")?;
                    (Some(m), run)
                }
                None => (None, resolve(config, seed)?),
            };
            if force {
                run.sim.force = true;
            }
            cmd_simulate(run, dir)
        }
        Command::Sweep { config, from_manifest, r, mc, window_start, seed, out_dir: dir } => {
            let (params, run) = match &from_manifest {
                Some(path) => {
                    let (m, run) = resolve_from_manifest(path, "sweep")?;
                    let r_values = m.r_values.clone().context("sweep manifest lacks r_values")?;
                    let mc_paths = m.mc_paths.context("sweep manifest lacks mc_paths")?;
                    ((r_values, mc_paths, m.window_start), run)
                }
                None => {
                    if r.len() < 2 {
                        bail!("usage: sweep needs at least two --r values (got {})", r.len());
                    }
                    ((r, mc, window_start), resolve(config, seed)?)
                }
            };
            cmd_sweep(run, params.0, params.1, params.2, dir)
        }
        Command::Mc { config, from_manifest, mc, window_start, seed, out_dir: dir } => {
            let (params, run) = match &from_manifest {
                Some(path) => {
                    let (m, run) = resolve_from_manifest(path, "mc")?;
                    let mc_paths = m.mc_paths.context("mc manifest lacks mc_paths")?;
                    ((mc_paths, m.window_start), run)
                }
                None => ((mc, window_start), resolve(config, seed)?),
            };
            cmd_mc(run, params.0, params.1, dir)
        }
        Command::Report { path } => {
            render::render(&path)?;
            Ok(0)
        }
    }
}

fn cmd_simulate(run: ResolvedRun, dir: Option<PathBuf>) -> Result<i32> {
    let dir = out_dir(dir);
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let report = validate_design(&run.sim.design, &run.sim.system)?;
    if !report.all_pass() && !run.sim.force {
        print_validation(&report);
        bail!("design validation failed; re-run with --force to simulate anyway");
    }

    let mut manifest = RunManifest::new("simulate", run.config.clone(), run.seed, &report);
    manifest.stream_ids = vec![run.sim.stream_id];
    manifest.outputs =
        vec!["trajectory.csv".into(), "events.jsonl".into(), "manifest.json".into()];
    let manifest_path = dir.join("manifest.json");
    manifest.write(&manifest_path)?;

    match run_trajectory(&run.sim) {
        Ok((rec, log)) => {
            let mut csv = Vec::new();
            write_trajectory_csv(&rec, &mut csv)?;
            std::fs::write(dir.join("trajectory.csv"), &csv)?;
            let mut jsonl = Vec::new();
            write_events_jsonl(&log, &mut jsonl)?;
            std::fs::write(dir.join("events.jsonl"), &jsonl)?;
            manifest.status = "complete".into();
            manifest.write(&manifest_path)?;
            println!(
                "wrote {} ({} samples, {} transmissions, {} control updates)",
                dir.display(),
                rec.len(),
                log.eso.len(),
                log.ctrl.len()
            );
            Ok(0)
        }
        Err(CoreError::Divergence { t, stream_id }) => {
            manifest.status = "diverged".into();
            manifest.divergence_time = Some(t);
            manifest.write(&manifest_path)?;
            eprintln!("trajectory diverged at t = {t} (stream {stream_id}); see manifest");
            Ok(1)
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_sweep(
    run: ResolvedRun,
    r_values: Vec<f64>,
    mc: usize,
    window_start: Option<f64>,
    dir: Option<PathBuf>,
) -> Result<i32> {
    let dir = out_dir(dir);
    std::fs::create_dir_all(&dir)?;
    if mc == 1 {
        eprintln!("warning: --mc 1 gives a single-path study; expect high variance");
    }
    let window = window_start.unwrap_or(0.75 * run.sim.horizon);
    let report = validate_design(&run.sim.design, &run.sim.system)?;

    let mut manifest = RunManifest::new("sweep", run.config.clone(), run.seed, &report);
    manifest.stream_ids = (0..mc as u64).collect();
    manifest.r_values = Some(r_values.clone());
    manifest.mc_paths = Some(mc);
    manifest.window_start = Some(window);
    manifest.outputs = vec!["scaling.json".into(), "manifest.json".into()];
    let manifest_path = dir.join("manifest.json");
    manifest.write(&manifest_path)?;

    let scaling = scaling_study(&run.sim, &r_values, mc, window)?;
    let json = serde_json::to_string_pretty(&scaling)?;
    std::fs::write(dir.join("scaling.json"), json.as_bytes())?;

    let failures: Vec<&etadrc_core::analysis::ScalingRun> =
        scaling.runs.iter().filter(|r| r.error.is_some()).collect();
    for f in &failures {
        eprintln!("r = {}: {}", f.r, f.error.as_deref().unwrap_or("unknown failure"));
    }
    let all_failed = failures.len() == scaling.runs.len();
    manifest.status = if all_failed { "failed".into() } else { "complete".into() };
    manifest.write(&manifest_path)?;

    render::print_scaling(&scaling);
    println!("wrote {}", dir.display());
    Ok(if all_failed { 1 } else { 0 })
}

fn cmd_mc(
    run: ResolvedRun,
    mc: usize,
    window_start: Option<f64>,
    dir: Option<PathBuf>,
) -> Result<i32> {
    let dir = out_dir(dir);
    std::fs::create_dir_all(&dir)?;
    if mc == 1 {
        eprintln!("warning: --mc 1 gives a single-path summary; expect high variance");
    }
    let window = window_start.unwrap_or(0.75 * run.sim.horizon);
    let report = validate_design(&run.sim.design, &run.sim.system)?;
    if !report.all_pass() && !run.sim.force {
        print_validation(&report);
        bail!("design validation failed; set force in the config to run anyway");
    }

    let mut manifest = RunManifest::new("mc", run.config.clone(), run.seed, &report);
    manifest.stream_ids = (0..mc as u64).collect();
    manifest.mc_paths = Some(mc);
    manifest.window_start = Some(window);
    manifest.outputs = vec!["mc_summary.json".into(), "curves.csv".into(), "manifest.json".into()];
    let manifest_path = dir.join("manifest.json");
    manifest.write(&manifest_path)?;

    match run_ensemble(&run.sim, mc) {
        Ok(ens) => {
            let summary = mc_summary(&ens, window)?;
            let json = serde_json::to_string_pretty(&summary)?;
            std::fs::write(dir.join("mc_summary.json"), json.as_bytes())?;
            let mut curves = Vec::new();
            write_mc_curves_csv(&summary, &mut curves)?;
            std::fs::write(dir.join("curves.csv"), &curves)?;
            manifest.status = "complete".into();
            manifest.write(&manifest_path)?;
            render::print_mc(&summary);
            println!("wrote {}", dir.display());
            Ok(0)
        }
        Err(CoreError::Divergence { t, stream_id }) => {
            manifest.status = "diverged".into();
            manifest.divergence_time = Some(t);
            manifest.write(&manifest_path)?;
            eprintln!("stream {stream_id} diverged at t = {t}; see manifest");
            Ok(1)
        }
        Err(e) => Err(e.into()),
    }
}
