//! Event-triggered output-feedback controller with disturbance compensation.
//!
//! The control value combines a scaled feedback term over the held state
//! estimates with cancellation of the held disturbance estimate:
//! `u = sum_{i=1..n} theta^{n+1-i} c_i xhat_i(t*_l) - xhat_{n+1}(t*_l)`.
//! It is piecewise constant: a new sample of the full estimate vector is taken
//! when the dwell time `upsilon` has elapsed and the summed estimate deviation
//! reaches `kappa2 * r^-1/2`.

use crate::error::{Error, Result};
use crate::gains::DesignGains;

/// Controller state: the held estimate vector `xhat(t*_l)`, the current
/// (piecewise constant) control value, and trigger bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct CtrlState {
    pub xhat_held: Vec<f64>,
    /// `t*_l`: time of the last control update.
    pub t_last: f64,
    /// Update counter; the initial event at t = 0 is number 1.
    pub l: u64,
    /// Current control value; always equals `control_value(xhat_held)`.
    pub u: f64,
}

impl CtrlState {
    /// Seeds the controller with the initial update at t = 0 holding `xhat(0)`.
    pub fn init(xhat0: &[f64], design: &DesignGains) -> Result<Self> {
        let u = control_value(xhat0, design)?;
        Ok(Self { xhat_held: xhat0.to_vec(), t_last: 0.0, l: 1, u })
    }
}

/// `u = sum_{i=1..n} theta^{n+1-i} c_i xhat_i - xhat_{n+1}`, evaluated on a
/// held estimate vector of length `n+1`.
pub fn control_value(xhat_held: &[f64], design: &DesignGains) -> Result<f64> {
    let n = design.n();
    if xhat_held.len() != n + 1 {
        return Err(Error::InvalidDimension(format!(
            "held estimate vector must have length n+1 = {}, got {}",
            n + 1,
            xhat_held.len()
        )));
    }
    let theta = design.theta();
    let mut u = 0.0;
    for (i, c) in design.cs().iter().enumerate() {
        u += theta.powi((n - i) as i32) * c * xhat_held[i];
    }
    Ok(u - xhat_held[n])
}

/// Control-update trigger: fires at time `t` iff the dwell time has elapsed
/// (`t - t_last >= upsilon`) and the total estimate deviation
/// `sum_{i=1..n+1} |xhat_i(t) - xhat_i(t*_l)|` has reached the threshold
/// `kappa2 * r^-1/2` (inclusive).
pub fn etm2_should_trigger(
    xhat_now: &[f64],
    state: &CtrlState,
    t: f64,
    upsilon: f64,
    design: &DesignGains,
) -> bool {
    if t - state.t_last < upsilon {
        return false;
    }
    let dev: f64 =
        xhat_now.iter().zip(&state.xhat_held).map(|(a, b)| (a - b).abs()).sum();
    dev >= design.etm2_threshold()
}

/// Applies a control update: hold the fresh estimates, recompute `u`, stamp
/// the time, bump the counter.
pub fn ctrl_on_trigger(
    state: &mut CtrlState,
    xhat_now: &[f64],
    t: f64,
    design: &DesignGains,
) -> Result<()> {
    debug_assert!(t >= state.t_last, "update time must not move backwards");
    state.u = control_value(xhat_now, design)?;
    state.xhat_held.clear();
    state.xhat_held.extend_from_slice(xhat_now);
    state.t_last = t;
    state.l += 1;
    Ok(())
}
