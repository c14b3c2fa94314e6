//! Driving noises: Brownian increment streams, bounded noise `w1(t) = psi(t, B1(t))`,
//! and colored (Ornstein-Uhlenbeck) noise `w2`.
//!
//! Randomness is organized as counter-based streams: a `(seed, stream_id, substream)`
//! triple addresses one cryptographic keystream, so every trajectory of a Monte Carlo
//! ensemble owns two private generators (one per Brownian motion) and reproduces
//! bit-for-bit regardless of thread scheduling.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Which of the two mutually independent Brownian motions a stream drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Substream {
    /// Drives the bounded noise `w1 = psi(t, B1)`.
    B1 = 0,
    /// Drives the colored noise `w2`.
    B2 = 1,
}

/// Address of one independent random stream.
///
/// Distinct `(seed, stream_id, substream)` triples map to distinct ChaCha
/// streams (statistically independent); identical triples reproduce the same
/// sequence bit-for-bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
    pub substream: Substream,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64, substream: Substream) -> Self {
        Self { seed, stream_id, substream }
    }

    fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        // One ChaCha stream per (trajectory, Brownian motion) pair.
        rng.set_stream(self.stream_id.wrapping_mul(2).wrapping_add(self.substream as u64));
        rng
    }
}

/// Stateful Brownian-increment generator for one stream.
pub struct BrownianStream {
    rng: ChaCha8Rng,
}

impl BrownianStream {
    pub fn new(stream: RngStream) -> Self {
        Self { rng: stream.rng() }
    }

    /// Draws one increment `dB ~ Normal(0, h)`. Accumulating increments yields
    /// the path `B(t)`.
    pub fn increment(&mut self, h: f64) -> Result<f64> {
        if !(h > 0.0) {
            return Err(Error::Domain(format!("step h must be positive, got {h}")));
        }
        let z: f64 = self.rng.sample(StandardNormal);
        Ok(z * h.sqrt())
    }
}

/// Bounded noise: `w1(t) = psi(t, B1(t))` with declared amplitude bound `alpha5`.
///
/// The bound is a declaration about user-supplied code; [`BoundedNoiseSpec::eval_checked`]
/// and [`BoundedNoiseSpec::grid_sup`] spot-check it, they do not prove it.
#[derive(Clone)]
pub struct BoundedNoiseSpec {
    psi: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    alpha5: f64,
}

impl fmt::Debug for BoundedNoiseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BoundedNoiseSpec").field("alpha5", &self.alpha5).finish()
    }
}

impl BoundedNoiseSpec {
    pub fn new(psi: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>, alpha5: f64) -> Result<Self> {
        if !(alpha5 > 0.0) {
            return Err(Error::Domain(format!("alpha5 must be positive, got {alpha5}")));
        }
        Ok(Self { psi, alpha5 })
    }

    pub fn alpha5(&self) -> f64 {
        self.alpha5
    }

    /// `w1 = psi(t, b1)`.
    pub fn eval(&self, t: f64, b1: f64) -> f64 {
        (self.psi)(t, b1)
    }

    /// `eval` plus the opt-in amplitude check `|psi| <= alpha5`.
    pub fn eval_checked(&self, t: f64, b1: f64) -> Result<f64> {
        let v = self.eval(t, b1);
        if v.abs() <= self.alpha5 {
            Ok(v)
        } else {
            Err(Error::AssumptionViolation {
                bound: "bounded-noise amplitude".into(),
                detail: format!("|psi({t}, {b1})| = {} exceeds declared alpha5 = {}", v.abs(), self.alpha5),
            })
        }
    }

    /// Sup of `|psi|` over a rectangular sample grid; a smoke check of the
    /// declared bound, not a proof.
    pub fn grid_sup(&self, t_max: f64, b_max: f64, points_per_axis: usize) -> f64 {
        let m = points_per_axis.max(2);
        let mut sup = 0.0_f64;
        for i in 0..m {
            let t = t_max * i as f64 / (m - 1) as f64;
            for j in 0..m {
                let b = -b_max + 2.0 * b_max * j as f64 / (m - 1) as f64;
                sup = sup.max(self.eval(t, b).abs());
            }
        }
        sup
    }
}

/// Parameters of the colored-noise equation
/// `dw2 = -rho1 w2 dt + rho1 sqrt(2 rho2) dB2`.
///
/// `rho1` is the inverse correlation time, `rho2` the intensity; the
/// stationary second moment is `rho1 * rho2`. `rho2 = 0` is allowed as the
/// degenerate noise-off case (then `w2` decays deterministically).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OuParams {
    pub rho1: f64,
    pub rho2: f64,
    pub w2_init: f64,
}

impl OuParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho1 > 0.0) {
            return Err(Error::Domain(format!("rho1 must be positive, got {}", self.rho1)));
        }
        if !(self.rho2 >= 0.0) {
            return Err(Error::Domain(format!("rho2 must be nonnegative, got {}", self.rho2)));
        }
        Ok(())
    }

    /// Stationary second moment `rho1 * rho2` of the exact process.
    pub fn stationary_variance(&self) -> f64 {
        self.rho1 * self.rho2
    }

    /// Diffusion coefficient `rho1 * sqrt(2 rho2)`.
    pub fn diffusion(&self) -> f64 {
        self.rho1 * (2.0 * self.rho2).sqrt()
    }
}

/// Current value of the colored noise together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuState {
    pub w2: f64,
    pub rho1: f64,
    pub rho2: f64,
}

impl OuState {
    pub fn new(params: &OuParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { w2: params.w2_init, rho1: params.rho1, rho2: params.rho2 })
    }
}

/// One explicit Euler-Maruyama update of the colored noise:
/// `w2 <- w2 - rho1 w2 h + rho1 sqrt(2 rho2) dB2`.
pub fn ou_step(state: &OuState, h: f64, db2: f64) -> Result<OuState> {
    if !(h > 0.0) {
        return Err(Error::Domain(format!("step h must be positive, got {h}")));
    }
    let w2 = state.w2 - state.rho1 * state.w2 * h + state.rho1 * (2.0 * state.rho2).sqrt() * db2;
    Ok(OuState { w2, ..*state })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn psi_sec5() -> BoundedNoiseSpec {
        BoundedNoiseSpec::new(Arc::new(|t: f64, b: f64| 2.0 * (t + b).sin()), 2.0).unwrap()
    }

    #[test]
    fn brownian_increment_rejects_nonpositive_step() {
        let mut s = BrownianStream::new(RngStream::new(1, 0, Substream::B1));
        assert!(matches!(s.increment(0.0), Err(Error::Domain(_))));
        assert!(matches!(s.increment(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn brownian_increment_moments() {
        // N = 1e6 unit-step increments: sample mean within +-0.004 (3 sigma of
        // 1/sqrt(N) = 1e-3), sample variance within 1 +- 1%.
        let mut s = BrownianStream::new(RngStream::new(42, 0, Substream::B1));
        let n = 1_000_000usize;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let v = s.increment(1.0).unwrap();
            sum += v;
            sumsq += v * v;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        assert!(mean.abs() < 0.004, "mean = {mean}");
        assert!((var - 1.0).abs() < 0.01, "var = {var}");
    }

    #[test]
    fn same_stream_reproduces_bitwise() {
        let make = || {
            let mut s = BrownianStream::new(RngStream::new(7, 3, Substream::B2));
            (0..64).map(|_| s.increment(0.5).unwrap()).collect::<Vec<_>>()
        };
        let a = make();
        let b = make();
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_substreams_are_decorrelated() {
        // Empirical correlation between the two substreams over 1e6 pairs
        // within +-0.004 (3 sigma band of 3/sqrt(N) = 0.003, with margin).
        let mut s1 = BrownianStream::new(RngStream::new(11, 0, Substream::B1));
        let mut s2 = BrownianStream::new(RngStream::new(11, 0, Substream::B2));
        let n = 1_000_000usize;
        let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let x = s1.increment(1.0).unwrap();
            let y = s2.increment(1.0).unwrap();
            sx += x;
            sy += y;
            sxx += x * x;
            syy += y * y;
            sxy += x * y;
        }
        let nf = n as f64;
        let cov = sxy / nf - (sx / nf) * (sy / nf);
        let corr = cov / ((sxx / nf - (sx / nf).powi(2)).sqrt() * (syy / nf - (sy / nf).powi(2)).sqrt());
        assert!(corr.abs() < 0.004, "corr = {corr}");
    }

    #[test]
    fn ou_step_zero_diffusion_decays_like_exponential() {
        // dB2 forced to zero, rho1 = 1, w2(0) = 1: Euler gives (1-h)^(t/h),
        // within O(h) of e^-t.
        let h = 1e-3;
        let mut st = OuState { w2: 1.0, rho1: 1.0, rho2: 1.5 };
        let steps = (1.0 / h) as usize;
        for _ in 0..steps {
            st = ou_step(&st, h, 0.0).unwrap();
        }
        let exact = (-1.0_f64).exp();
        assert!((st.w2 - exact).abs() < 1e-3, "w2 = {}, exact = {}", st.w2, exact);
    }

    #[test]
    fn ou_stationary_second_moment() {
        // rho1 = rho2 = 1.5: stationary E w2^2 = rho1^2 * 2 rho2 / (2 rho1)
        // = rho1 rho2 = 2.25, within 5% over 1e5 post-burn-in samples.
        let params = OuParams { rho1: 1.5, rho2: 1.5, w2_init: 0.0 };
        let mut st = OuState::new(&params).unwrap();
        let mut bs = BrownianStream::new(RngStream::new(5, 0, Substream::B2));
        let h = 0.01;
        let burn_in = (10.0 / params.rho1 / h) as usize;
        for _ in 0..burn_in {
            st = ou_step(&st, h, bs.increment(h).unwrap()).unwrap();
        }
        let n = 100_000usize;
        let mut sumsq = 0.0;
        for _ in 0..n {
            st = ou_step(&st, h, bs.increment(h).unwrap()).unwrap();
            sumsq += st.w2 * st.w2;
        }
        let m2 = sumsq / n as f64;
        let target = params.stationary_variance();
        assert!(
            (m2 - target).abs() < 0.05 * target,
            "second moment {m2} vs stationary {target}"
        );
    }

    #[test]
    fn ou_mean_decay() {
        // E[w2(t)] = w2(0) e^(-rho1 t), checked at t = 1 over 1e4 paths within
        // a 3 sigma Monte Carlo band.
        let params = OuParams { rho1: 1.5, rho2: 1.5, w2_init: 2.0 };
        let h = 1e-3;
        let steps = (1.0 / h) as usize;
        let paths = 10_000u64;
        let mut sum = 0.0;
        for i in 0..paths {
            let mut st = OuState::new(&params).unwrap();
            let mut bs = BrownianStream::new(RngStream::new(99, i, Substream::B2));
            for _ in 0..steps {
                st = ou_step(&st, h, bs.increment(h).unwrap()).unwrap();
            }
            sum += st.w2;
        }
        let mean = sum / paths as f64;
        let exact = 2.0 * (-1.5_f64).exp();
        // Var w2(1) = rho1 rho2 (1 - e^(-2 rho1)) ~ 2.138; 3 sigma of the mean.
        let band = 3.0 * (2.25 * (1.0 - (-3.0_f64).exp()) / paths as f64).sqrt();
        assert!((mean - exact).abs() < band, "mean {mean}, exact {exact}, band {band}");
    }

    #[test]
    fn ou_sliding_window_variance_is_flat_after_burn_in() {
        let params = OuParams { rho1: 1.5, rho2: 1.5, w2_init: 0.0 };
        let mut st = OuState::new(&params).unwrap();
        let mut bs = BrownianStream::new(RngStream::new(17, 0, Substream::B2));
        let h = 0.01;
        let burn_in = (10.0 / params.rho1 / h) as usize;
        for _ in 0..burn_in {
            st = ou_step(&st, h, bs.increment(h).unwrap()).unwrap();
        }
        let windows = 8;
        let window_len = 20_000usize;
        let mut vars = Vec::new();
        for _ in 0..windows {
            let mut sumsq = 0.0;
            for _ in 0..window_len {
                st = ou_step(&st, h, bs.increment(h).unwrap()).unwrap();
                sumsq += st.w2 * st.w2;
            }
            vars.push(sumsq / window_len as f64);
        }
        let target = params.stationary_variance();
        for v in &vars {
            assert!((v - target).abs() < 0.35 * target, "window variance {v} vs {target}");
        }
    }

    #[test]
    fn bounded_noise_examples() {
        let spec = psi_sec5();
        assert_eq!(spec.eval(0.0, 0.0), 0.0);

        let one = BoundedNoiseSpec::new(Arc::new(|_, _| 1.0), 1.0).unwrap();
        assert_eq!(one.eval(3.0, -7.0), 1.0);
        assert!(one.eval_checked(3.0, -7.0).is_ok());
    }

    #[test]
    fn bounded_noise_grid_sup_within_declared_bound() {
        let spec = psi_sec5();
        let sup = spec.grid_sup(100.0, 50.0, 1000); // 1e6 grid points
        assert!(sup <= spec.alpha5() + 1e-12, "sup = {sup}");
    }

    #[test]
    fn bounded_noise_violation_is_reported() {
        let spec = BoundedNoiseSpec::new(Arc::new(|_, _| 3.0), 2.0).unwrap();
        match spec.eval_checked(0.0, 0.0) {
            Err(Error::AssumptionViolation { bound, .. }) => {
                assert!(bound.contains("bounded-noise"));
            }
            other => panic!("expected assumption violation, got {other:?}"),
        }
    }
}
