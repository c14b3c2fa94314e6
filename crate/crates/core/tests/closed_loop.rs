//! Closed-loop integration tests: convergence smoke checks, hold semantics,
//! deterministic regression anchors, and ensemble-level invariants.

use std::sync::Arc;

use etadrc_core::analysis::event_stats;
use etadrc_core::config::RunConfig;
use etadrc_core::gains::DesignGains;
use etadrc_core::noise::{BoundedNoiseSpec, OuParams};
use etadrc_core::plant::SystemSpec;
use etadrc_core::presets;
use etadrc_core::simulator::{run_ensemble, run_trajectory, SimConfig};

/// The reference configuration with both noises switched off (psi = 0 and a
/// zero-intensity colored noise), leaving the deterministic skeleton
/// f = x1 + 2 x2 + sin t + cos(x1 + x2).
fn sec5_noise_free() -> SimConfig {
    let mut cfg = RunConfig::preset("paper-sec5").unwrap().to_sim_config().unwrap();
    cfg.bounded_noise = BoundedNoiseSpec::new(Arc::new(|_, _| 0.0), 1.0).unwrap();
    cfg.ou = OuParams { rho1: 1.5, rho2: 0.0, w2_init: 0.0 };
    cfg
}

fn linear_noise_free(r: f64) -> SimConfig {
    let mut cfg = RunConfig::preset("linear-n2").unwrap().to_sim_config().unwrap();
    cfg.design = cfg.design.with_r(r).unwrap();
    cfg.bounded_noise = BoundedNoiseSpec::new(Arc::new(|_, _| 0.0), 1.0).unwrap();
    cfg.ou = OuParams { rho1: 1.5, rho2: 0.0, w2_init: 0.0 };
    cfg
}

#[test]
fn high_gain_estimation_error_shrinks_with_r() {
    // Linear plant smoke test: by t = 1 the state-estimation errors are below
    // 10 / r for both desk-scale gains.
    for r in [20.0, 50.0] {
        let mut cfg = RunConfig::preset("linear-n2").unwrap().to_sim_config().unwrap();
        cfg.design = cfg.design.with_r(r).unwrap();
        cfg.horizon = 1.0;
        cfg.record_stride = 100;
        let (rec, _) = run_trajectory(&cfg).unwrap();
        let last = rec.len() - 1;
        for i in 0..rec.n {
            let err = (rec.x[i][last] - rec.xhat[i][last]).abs();
            assert!(err < 10.0 / r, "r = {r}, state {}: error {err}", i + 1);
        }
    }
}

#[test]
fn chain_of_integrators_matches_polynomial_flow() {
    // f = 0, g = 0, u pinned to zero by zero gains (estimates never move from
    // zero): the plant is a pure chain of integrators with polynomial flow
    // x1(t) = 1 + 2t + 3t^2/2, x2(t) = 2 + 3t, x3(t) = 3.
    let system = SystemSpec::new(
        "chain3",
        3,
        Arc::new(|_, _: &[f64], _, _| 0.0),
        vec![Arc::new(|_: &[f64]| 0.0), Arc::new(|_: &[f64]| 0.0), Arc::new(|_: &[f64]| 0.0)],
        vec![0.0; 3],
        [0.0; 4],
        0.0,
    )
    .unwrap();
    let cfg = SimConfig {
        system,
        bounded_noise: BoundedNoiseSpec::new(Arc::new(|_, _| 0.0), 1.0).unwrap(),
        design: DesignGains::new(
            vec![0.0; 4],
            vec![0.0; 3],
            1.0,
            1.0,
            1.0,
            1.0,
            1.0,
            1.0,
        )
        .unwrap(),
        ou: OuParams { rho1: 1.0, rho2: 0.0, w2_init: 0.0 },
        x0: vec![1.0, 2.0, 3.0],
        xhat0: vec![0.0; 4],
        horizon: 1.0,
        step: 1e-3,
        record_stride: 100,
        seed: 0,
        stream_id: 0,
        check_assumptions: false,
        force: true, // zero gains are deliberately not Hurwitz
    };
    let (rec, log) = run_trajectory(&cfg).unwrap();
    let last = rec.len() - 1;
    let h = cfg.effective_step();
    // Euler's global error on this flow is exactly 1.5 h T for x1; x2 and x3
    // integrate polynomials of degree <= 1 exactly.
    assert!((rec.x[0][last] - 4.5).abs() <= 2.0 * h, "x1 = {}", rec.x[0][last]);
    assert!((rec.x[1][last] - 5.0).abs() <= 1e-12, "x2 = {}", rec.x[1][last]);
    assert!((rec.x[2][last] - 3.0).abs() <= 1e-12, "x3 = {}", rec.x[2][last]);
    assert!(rec.u.iter().all(|&u| u == 0.0));
    // Estimates pinned at zero, so no control update ever fires.
    assert_eq!(log.ctrl.len(), 1);
}

#[test]
fn noise_free_skeleton_converges() {
    // Deterministic regression anchor: the closed loop drives the state into
    // a small neighborhood despite the persistent sin(t) + cos(x1+x2) forcing.
    let cfg = sec5_noise_free();
    let (rec, _) = run_trajectory(&cfg).unwrap();
    let last = rec.len() - 1;
    let norm = (rec.x[0][last].powi(2) + rec.x[1][last].powi(2)).sqrt();
    assert!(norm < 0.05, "||x(T)|| = {norm}");
}

#[test]
fn euler_order_of_accuracy_on_linear_loop() {
    // Noise-free linear closed loop with both mechanisms firing at every grid
    // point (vanishing dwell scales and thresholds): the loop is then a smooth
    // one-step map and halving h changes x(T) by O(h) — defect ratio near 2.
    // With sporadic events the terminal state is phase-sensitive to the
    // threshold-crossing grid points and no clean ratio exists; that regime is
    // covered by the hold/dwell scans instead.
    let x_at = |h: f64| {
        let mut cfg = linear_noise_free(10.0);
        cfg.design = DesignGains::new(
            cfg.design.lambdas().to_vec(),
            cfg.design.cs().to_vec(),
            cfg.design.r(),
            cfg.design.theta(),
            1e-12,
            1e-12,
            1e-12,
            1e-12,
        )
        .unwrap();
        cfg.step = h;
        cfg.horizon = 2.0;
        cfg.record_stride = 500;
        let (rec, log) = run_trajectory(&cfg).unwrap();
        // Per-step supervision: one event per grid point after warm-up.
        assert!(log.ctrl.len() as u64 > cfg.steps() / 2);
        let last = rec.len() - 1;
        assert!((rec.t[last] - 2.0).abs() < 1e-9);
        [rec.x[0][last], rec.x[1][last]]
    };
    let a = x_at(4e-4);
    let b = x_at(2e-4);
    let c = x_at(1e-4);
    let e1 = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
    let e2 = ((b[0] - c[0]).powi(2) + (b[1] - c[1]).powi(2)).sqrt();
    let ratio = e1 / e2;
    assert!(
        (1.6..=2.6).contains(&ratio),
        "refinement ratio {ratio} (defects {e1:.3e}, {e2:.3e})"
    );
}

#[test]
fn hold_values_are_piecewise_constant_between_events() {
    // Stride-1 scan: u changes only where a control update is flagged, the
    // held output changes only where a transmission is flagged.
    let mut cfg = RunConfig::preset("paper-sec5").unwrap().to_sim_config().unwrap();
    cfg.horizon = 0.5;
    cfg.record_stride = 1;
    let (rec, _) = run_trajectory(&cfg).unwrap();
    for j in 1..rec.len() {
        if rec.u[j] != rec.u[j - 1] {
            assert!(rec.trig_ctrl[j], "u changed without a control event at t = {}", rec.t[j]);
        }
        if rec.y_held[j] != rec.y_held[j - 1] {
            assert!(rec.trig_eso[j], "y_held changed without a transmission at t = {}", rec.t[j]);
        }
    }
}

#[test]
fn deviation_exceeds_threshold_only_inside_dwell_windows() {
    // At every grid point the summed estimate deviation from the held vector
    // is below the trigger threshold, unless the dwell window is still open
    // (the only way the deviation can run past the threshold).
    let mut cfg = RunConfig::preset("paper-sec5").unwrap().to_sim_config().unwrap();
    cfg.horizon = 0.5;
    cfg.record_stride = 1;
    let (rec, log) = run_trajectory(&cfg).unwrap();
    let thr = cfg.design.etm2_threshold();
    let (_, upsilon) = cfg.design.dwell_times();
    let mut ev = 0usize;
    for j in 0..rec.len() {
        let t = rec.t[j];
        while ev + 1 < log.ctrl.len() && log.ctrl[ev + 1].t <= t {
            ev += 1;
        }
        let held = &log.ctrl[ev].snapshot;
        let dev: f64 =
            (0..=rec.n).map(|i| (rec.xhat[i][j] - held[i]).abs()).sum();
        if dev >= thr {
            assert!(
                t - log.ctrl[ev].t < upsilon,
                "deviation {dev} >= {thr} at t = {t} outside the dwell window"
            );
        }
    }
}

#[test]
fn reference_run_event_logs_respect_dwell_exactly() {
    let mut cfg = RunConfig::preset("paper-sec5").unwrap().to_sim_config().unwrap();
    cfg.horizon = 2.0;
    cfg.record_stride = 100;
    let (_, log) = run_trajectory(&cfg).unwrap();
    assert!(log.eso.len() > 1 && log.ctrl.len() > 1);
    assert_eq!(log.eso[0].t, 0.0);
    assert_eq!(log.ctrl[0].t, 0.0);
    for w in log.eso.windows(2) {
        assert!(w[1].t - w[0].t >= log.tau);
        assert_eq!(w[1].idx, w[0].idx + 1);
    }
    for w in log.ctrl.windows(2) {
        assert!(w[1].t - w[0].t >= log.upsilon);
    }
}

#[test]
fn reference_ensemble_completes_with_clean_logs() {
    // 100 trajectories of the reference configuration: all complete, zero
    // dwell violations, and the colored noise is stationary by the horizon
    // (ensemble second moment near rho1 rho2 = 2.25).
    let mut cfg = RunConfig::preset("paper-sec5").unwrap().to_sim_config().unwrap();
    cfg.record_stride = 2000;
    let ens = run_ensemble(&cfg, 100).unwrap();
    assert_eq!(ens.len(), 100);
    let logs: Vec<_> = ens.iter().map(|(_, l)| l.clone()).collect();
    let report = event_stats(&logs, cfg.horizon).unwrap();
    assert_eq!(report.eso.dwell_violations, 0);
    assert_eq!(report.ctrl.dwell_violations, 0);
    assert!(report.eso.first_event_at_zero && report.ctrl.first_event_at_zero);

    let finals: Vec<f64> = ens.iter().map(|(rec, _)| *rec.w2.last().unwrap()).collect();
    let m2 = finals.iter().map(|v| v * v).sum::<f64>() / finals.len() as f64;
    // Var(w2^2) = 2 sigma^4 for a centered Gaussian; 3 sigma band on the mean.
    let band = 3.0 * (2.0 * 2.25_f64.powi(2) / finals.len() as f64).sqrt();
    assert!((m2 - 2.25).abs() < band, "E w2(T)^2 = {m2}, band {band}");
}

#[test]
fn silent_system_with_matched_initial_state_never_retriggers() {
    // Estimation starts exact (x(0) = xhat(0) = 0) and nothing excites the
    // loop, so neither mechanism fires after its definitional initial event.
    let (system, bounded_noise) = presets::system("silent").unwrap();
    let cfg = SimConfig {
        system,
        bounded_noise,
        design: RunConfig::preset("silent").unwrap().to_sim_config().unwrap().design,
        ou: OuParams { rho1: 1.5, rho2: 0.0, w2_init: 0.0 },
        x0: vec![0.0, 0.0],
        xhat0: vec![0.0, 0.0, 0.0],
        horizon: 5.0,
        step: 1e-4,
        record_stride: 100,
        seed: 9,
        stream_id: 0,
        check_assumptions: true,
        force: false,
    };
    let (rec, log) = run_trajectory(&cfg).unwrap();
    assert_eq!(log.eso.len(), 1);
    assert_eq!(log.ctrl.len(), 1);
    assert!(rec.xhat.iter().all(|row| row.iter().all(|&v| v == 0.0)));
}
