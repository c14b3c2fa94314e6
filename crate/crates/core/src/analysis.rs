//! Monte Carlo aggregation and convergence-law checks.
//!
//! Turns ensembles of trajectories into per-grid-point moment curves, windowed
//! summary statistics, gain-scaling verdicts, and event statistics. Windowed
//! quantities are taken over `[window_start, T]`, the empirical stand-in for
//! "after the settling time"; exact convergence exponents are asymptotic in
//! the gain and are deliberately not asserted — monotonicity and ordering are
//! the testable claims at finite gain, sample count, and step size.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::{run_ensemble, EventLog, SimConfig, TrajectoryRecord};

/// Quantiles of the per-path sup error over the measurement window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupErrorQuantiles {
    pub min: f64,
    pub median: f64,
    pub p90: f64,
    pub max: f64,
}

/// Event-count statistics for one mechanism across an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountStats {
    pub min: u64,
    pub mean: f64,
    pub max: u64,
}

/// Ensemble summary: per-grid-point second moments, windowed sup-error
/// quantiles, and event counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub n_paths: usize,
    pub stream_ids: Vec<u64>,
    pub time: Vec<f64>,
    /// `mse_err[i]`: per-grid-point `E|x_{i+1} - xhat_{i+1}|^2`; the last row
    /// compares the disturbance estimate against the true total disturbance.
    pub mse_err: Vec<Vec<f64>>,
    /// `msq_state[i]`: per-grid-point `E|x_{i+1}|^2`.
    pub msq_state: Vec<Vec<f64>>,
    pub window_start: f64,
    /// Per state `i`: quantiles over paths of `sup_{t in window} |x_i - xhat_i|`.
    pub sup_err: Vec<SupErrorQuantiles>,
    pub eso_counts: CountStats,
    pub ctrl_counts: CountStats,
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let idx = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[idx]
}

fn count_stats(counts: &[u64]) -> CountStats {
    let min = *counts.iter().min().unwrap();
    let max = *counts.iter().max().unwrap();
    let mean = counts.iter().sum::<u64>() as f64 / counts.len() as f64;
    CountStats { min, mean, max }
}

/// Per-path estimation error of state `i` (0-based) at sample `j`; the last
/// state compares against the recorded true total disturbance.
fn err_at(rec: &TrajectoryRecord, i: usize, j: usize) -> f64 {
    if i < rec.n {
        rec.x[i][j] - rec.xhat[i][j]
    } else {
        rec.xtotal[j] - rec.xhat[i][j]
    }
}

/// Averages second moments across an ensemble per grid point and aggregates
/// per-path sup errors over `[window_start, T]`.
///
/// Trajectories must share the time grid. Aggregation runs in stream-id order,
/// so the result is invariant under permutations of the input list (bit-for-bit).
pub fn mc_summary(
    ensemble: &[(TrajectoryRecord, EventLog)],
    window_start: f64,
) -> Result<McSummary> {
    if ensemble.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let mut order: Vec<usize> = (0..ensemble.len()).collect();
    order.sort_by_key(|&idx| ensemble[idx].0.stream_id);

    let first = &ensemble[order[0]].0;
    let n = first.n;
    let samples = first.len();
    let t_end = *first.t.last().ok_or(Error::EmptyEnsemble)?;
    if window_start >= t_end {
        return Err(Error::Domain(format!(
            "window_start {window_start} must precede the horizon {t_end}"
        )));
    }
    for &idx in &order {
        let rec = &ensemble[idx].0;
        if rec.n != n || rec.t != first.t {
            return Err(Error::GridMismatch(format!("stream {}", rec.stream_id)));
        }
    }

    let np = ensemble.len() as f64;
    let mut mse_err = vec![vec![0.0; samples]; n + 1];
    let mut msq_state = vec![vec![0.0; samples]; n];
    let mut sup_per_path = vec![Vec::with_capacity(ensemble.len()); n + 1];
    let mut eso_counts = Vec::with_capacity(ensemble.len());
    let mut ctrl_counts = Vec::with_capacity(ensemble.len());
    let mut stream_ids = Vec::with_capacity(ensemble.len());

    for &idx in &order {
        let (rec, log) = &ensemble[idx];
        stream_ids.push(rec.stream_id);
        eso_counts.push(log.eso.len() as u64);
        ctrl_counts.push(log.ctrl.len() as u64);
        let mut sups = vec![0.0_f64; n + 1];
        for j in 0..samples {
            let in_window = rec.t[j] >= window_start;
            for i in 0..=n {
                let e = err_at(rec, i, j);
                mse_err[i][j] += e * e;
                if in_window {
                    sups[i] = sups[i].max(e.abs());
                }
            }
            for i in 0..n {
                msq_state[i][j] += rec.x[i][j] * rec.x[i][j];
            }
        }
        for i in 0..=n {
            sup_per_path[i].push(sups[i]);
        }
    }
    for row in mse_err.iter_mut().chain(msq_state.iter_mut()) {
        for v in row.iter_mut() {
            *v /= np;
        }
    }
    let sup_err = sup_per_path
        .iter_mut()
        .map(|sups| {
            sups.sort_by(|a, b| a.partial_cmp(b).unwrap());
            SupErrorQuantiles {
                min: sups[0],
                median: quantile_sorted(sups, 0.5),
                p90: quantile_sorted(sups, 0.9),
                max: *sups.last().unwrap(),
            }
        })
        .collect();

    Ok(McSummary {
        n_paths: ensemble.len(),
        stream_ids,
        time: first.t.clone(),
        mse_err,
        msq_state,
        window_start,
        sup_err,
        eso_counts: count_stats(&eso_counts),
        ctrl_counts: count_stats(&ctrl_counts),
    })
}

/// Mean of `series` over grid points with `t >= window_start`.
pub fn windowed_mean(time: &[f64], series: &[f64], window_start: f64) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (t, v) in time.iter().zip(series) {
        if *t >= window_start {
            sum += v;
            count += 1;
        }
    }
    sum / count as f64
}

/// One gain point of a scaling study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRun {
    pub r: f64,
    pub h: f64,
    pub tau: f64,
    pub upsilon: f64,
    /// Windowed mean of `E|x_i - xhat_i|^2` per state (length n+1).
    pub windowed_mse_err: Vec<f64>,
    /// Monte Carlo standard error of each windowed MSE across paths.
    pub windowed_mse_err_se: Vec<f64>,
    /// Windowed mean of `sum_i E|x_i|^2`.
    pub windowed_msq_state_sum: f64,
    pub eso_count_mean: f64,
    pub ctrl_count_mean: f64,
    /// Set when this gain point failed (divergence or validation); the study
    /// continues with the other points.
    pub error: Option<String>,
}

/// Scaling-law report over increasing gains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub r_values: Vec<f64>,
    pub n_paths: usize,
    pub window_start: f64,
    pub runs: Vec<ScalingRun>,
    /// OLS slope of `log MSE` vs `log r` per error state (needs >= 2
    /// successful gain points).
    pub slopes: Vec<Option<f64>>,
    /// Per error state: windowed MSE strictly decreasing across all gains.
    pub mse_strictly_decreasing: Vec<bool>,
    /// At the largest gain: MSE(e_1) < MSE(e_2) < ... < MSE(e_{n+1}).
    pub ordering_at_largest_r: bool,
    /// Windowed state magnitude strictly decreasing across all gains.
    pub state_sum_strictly_decreasing: bool,
}

fn ols_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// Reruns the ensemble at each gain in `r_values` (dwell times and trigger
/// thresholds follow the gain), extracts windowed moments, fits log-log
/// slopes, and reports monotonicity verdicts.
pub fn scaling_study(
    base: &SimConfig,
    r_values: &[f64],
    n_paths: usize,
    window_start: f64,
) -> Result<ScalingReport> {
    if r_values.len() < 2 {
        return Err(Error::Domain("a scaling study needs at least two gain values".into()));
    }
    if r_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("gain values must be strictly increasing".into()));
    }
    if n_paths < 1 {
        return Err(Error::Domain("ensemble size must be >= 1".into()));
    }
    let n = base.system.n();
    let mut runs = Vec::with_capacity(r_values.len());
    for &r in r_values {
        let mut cfg = base.clone();
        match cfg.design.with_r(r) {
            Ok(d) => cfg.design = d,
            Err(e) => {
                runs.push(ScalingRun {
                    r,
                    h: f64::NAN,
                    tau: f64::NAN,
                    upsilon: f64::NAN,
                    windowed_mse_err: Vec::new(),
                    windowed_mse_err_se: Vec::new(),
                    windowed_msq_state_sum: f64::NAN,
                    eso_count_mean: f64::NAN,
                    ctrl_count_mean: f64::NAN,
                    error: Some(e.to_string()),
                });
                continue;
            }
        }
        let (tau, upsilon) = cfg.design.dwell_times();
        let h = cfg.effective_step();
        let outcome = run_ensemble(&cfg, n_paths).and_then(|ens| {
            let summary = mc_summary(&ens, window_start)?;
            // Per-path windowed MSE for the standard errors.
            let mut per_path: Vec<Vec<f64>> = vec![Vec::with_capacity(n_paths); n + 1];
            for (rec, _) in &ens {
                for i in 0..=n {
                    let sq: Vec<f64> = (0..rec.len())
                        .map(|j| {
                            let e = err_at(rec, i, j);
                            e * e
                        })
                        .collect();
                    per_path[i].push(windowed_mean(&rec.t, &sq, window_start));
                }
            }
            Ok((summary, per_path))
        });
        match outcome {
            Ok((summary, per_path)) => {
                let windowed_mse_err: Vec<f64> = (0..=n)
                    .map(|i| windowed_mean(&summary.time, &summary.mse_err[i], window_start))
                    .collect();
                let windowed_mse_err_se: Vec<f64> = per_path
                    .iter()
                    .zip(&windowed_mse_err)
                    .map(|(vals, mean)| {
                        if vals.len() < 2 {
                            return 0.0;
                        }
                        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                            / (vals.len() - 1) as f64;
                        (var / vals.len() as f64).sqrt()
                    })
                    .collect();
                let windowed_msq_state_sum: f64 = (0..n)
                    .map(|i| windowed_mean(&summary.time, &summary.msq_state[i], window_start))
                    .sum();
                runs.push(ScalingRun {
                    r,
                    h,
                    tau,
                    upsilon,
                    windowed_mse_err,
                    windowed_mse_err_se,
                    windowed_msq_state_sum,
                    eso_count_mean: summary.eso_counts.mean,
                    ctrl_count_mean: summary.ctrl_counts.mean,
                    error: None,
                });
            }
            Err(e) => runs.push(ScalingRun {
                r,
                h,
                tau,
                upsilon,
                windowed_mse_err: Vec::new(),
                windowed_mse_err_se: Vec::new(),
                windowed_msq_state_sum: f64::NAN,
                eso_count_mean: f64::NAN,
                ctrl_count_mean: f64::NAN,
                error: Some(e.to_string()),
            }),
        }
    }

    let ok: Vec<&ScalingRun> = runs.iter().filter(|r| r.error.is_none()).collect();
    let all_ok = ok.len() == runs.len();
    let slopes: Vec<Option<f64>> = (0..=n)
        .map(|i| {
            let pts: Vec<(f64, f64)> = ok
                .iter()
                .filter(|run| run.windowed_mse_err[i] > 0.0)
                .map(|run| (run.r.ln(), run.windowed_mse_err[i].ln()))
                .collect();
            ols_slope(&pts)
        })
        .collect();
    let mse_strictly_decreasing: Vec<bool> = (0..=n)
        .map(|i| {
            all_ok
                && ok.windows(2).all(|w| w[1].windowed_mse_err[i] < w[0].windowed_mse_err[i])
        })
        .collect();
    let ordering_at_largest_r = ok
        .last()
        .map(|run| run.windowed_mse_err.windows(2).all(|w| w[0] < w[1]))
        .unwrap_or(false);
    let state_sum_strictly_decreasing = all_ok
        && ok
            .windows(2)
            .all(|w| w[1].windowed_msq_state_sum < w[0].windowed_msq_state_sum);

    Ok(ScalingReport {
        r_values: r_values.to_vec(),
        n_paths,
        window_start,
        runs,
        slopes,
        mse_strictly_decreasing,
        ordering_at_largest_r,
        state_sum_strictly_decreasing,
    })
}

/// Inter-execution statistics for one mechanism, pooled across logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechStats {
    pub counts: Vec<u64>,
    pub count_min: u64,
    pub count_mean: f64,
    pub count_max: u64,
    pub gap_min: Option<f64>,
    pub gap_mean: Option<f64>,
    pub gap_median: Option<f64>,
    /// Number of logged gaps strictly below the dwell time. Zero by
    /// construction of the trigger predicates.
    pub dwell_violations: u64,
    /// True iff every log starts with its definitional event at t = 0.
    pub first_event_at_zero: bool,
}

/// Event statistics for both mechanisms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventReport {
    pub horizon: f64,
    pub eso: MechStats,
    pub ctrl: MechStats,
}

fn mech_stats(times_per_log: Vec<Vec<f64>>, dwell: f64) -> MechStats {
    let counts: Vec<u64> = times_per_log.iter().map(|t| t.len() as u64).collect();
    let first_event_at_zero = times_per_log.iter().all(|t| t.first() == Some(&0.0));
    let mut gaps: Vec<f64> = Vec::new();
    let mut violations = 0u64;
    for times in &times_per_log {
        for w in times.windows(2) {
            let gap = w[1] - w[0];
            if gap < dwell {
                violations += 1;
            }
            gaps.push(gap);
        }
    }
    gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let (gap_min, gap_mean, gap_median) = if gaps.is_empty() {
        (None, None, None)
    } else {
        (
            Some(gaps[0]),
            Some(gaps.iter().sum::<f64>() / gaps.len() as f64),
            Some(quantile_sorted(&gaps, 0.5)),
        )
    };
    MechStats {
        count_min: *counts.iter().min().unwrap(),
        count_mean: counts.iter().sum::<u64>() as f64 / counts.len() as f64,
        count_max: *counts.iter().max().unwrap(),
        counts,
        gap_min,
        gap_mean,
        gap_median,
        dwell_violations: violations,
        first_event_at_zero,
    }
}

/// Count and inter-execution-time statistics across a set of logs.
pub fn event_stats(logs: &[EventLog], horizon: f64) -> Result<EventReport> {
    if logs.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let tau = logs[0].tau;
    let upsilon = logs[0].upsilon;
    let eso_times: Vec<Vec<f64>> =
        logs.iter().map(|l| l.eso.iter().map(|e| e.t).collect()).collect();
    let ctrl_times: Vec<Vec<f64>> =
        logs.iter().map(|l| l.ctrl.iter().map(|e| e.t).collect()).collect();
    Ok(EventReport {
        horizon,
        eso: mech_stats(eso_times, tau),
        ctrl: mech_stats(ctrl_times, upsilon),
    })
}

/// Writes the per-grid-point moment curves of a summary as CSV
/// (`t,mse_e1..mse_e{n+1},msq_x1..msq_xn`).
pub fn write_mc_curves_csv<W: std::io::Write>(
    summary: &McSummary,
    mut w: W,
) -> std::io::Result<()> {
    let n = summary.msq_state.len();
    write!(w, "t")?;
    for i in 1..=n + 1 {
        write!(w, ",mse_e{i}")?;
    }
    for i in 1..=n {
        write!(w, ",msq_x{i}")?;
    }
    writeln!(w)?;
    for j in 0..summary.time.len() {
        write!(w, "{}", summary.time[j])?;
        for i in 0..=n {
            write!(w, ",{}", summary.mse_err[i][j])?;
        }
        for i in 0..n {
            write!(w, ",{}", summary.msq_state[i][j])?;
        }
        writeln!(w)?;
    }
    Ok(())
}
