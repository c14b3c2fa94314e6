//! Lower-triangular plant dynamics and the true extended state.
//!
//! The plant is the chain
//! `dx_i = x_{i+1} + g_i(x_1..x_i)` for `i < n`,
//! `dx_n = f(t, x, w1, w2) + g_n(x) + u`, output `y = x_1`.
//! The lumped term `x_{n+1}(t) := f(t, x, w1, w2)` is the total disturbance —
//! the ground truth the extended state observer is trying to estimate.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

type DynFn = Arc<dyn Fn(f64, &[f64], f64, f64) -> f64 + Send + Sync>;
type ChainFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// An order-`n` lower-triangular system: the unknown coupling `f`, the known
/// chain nonlinearities `g_1..g_n` (each `g_i` sees only the first `i`
/// states), their Lipschitz constants, and the declared growth-bound metadata
/// `alpha1..alpha4` plus a sup-bound for the noise growth function `phi1`.
///
/// The growth bounds are declarations about user-supplied code; only
/// `g_i(0,..,0) = 0` is enforced at construction, and
/// [`SystemSpec::lipschitz_smoke_check`] spot-checks the Lipschitz claim.
#[derive(Clone)]
pub struct SystemSpec {
    name: String,
    n: usize,
    f: DynFn,
    g: Vec<ChainFn>,
    lipschitz: Vec<f64>,
    alphas: [f64; 4],
    phi1_sup: f64,
}

impl fmt::Debug for SystemSpec {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        fm.debug_struct("SystemSpec")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("lipschitz", &self.lipschitz)
            .field("alphas", &self.alphas)
            .field("phi1_sup", &self.phi1_sup)
            .finish()
    }
}

impl SystemSpec {
    pub fn new(
        name: impl Into<String>,
        n: usize,
        f: DynFn,
        g: Vec<ChainFn>,
        lipschitz: Vec<f64>,
        alphas: [f64; 4],
        phi1_sup: f64,
    ) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidDimension("system order n must be >= 1".into()));
        }
        if g.len() != n || lipschitz.len() != n {
            return Err(Error::InvalidDimension(format!(
                "need exactly n = {n} chain functions and Lipschitz constants, got {} and {}",
                g.len(),
                lipschitz.len()
            )));
        }
        if lipschitz.iter().any(|l| *l < 0.0) || alphas.iter().any(|a| *a < 0.0) || phi1_sup < 0.0 {
            return Err(Error::Domain("growth-bound metadata must be nonnegative".into()));
        }
        let spec = Self { name: name.into(), n, f, g, lipschitz, alphas, phi1_sup };
        for i in 0..n {
            let zero = vec![0.0; i + 1];
            let v = spec.eval_g(i, &zero);
            if v != 0.0 {
                return Err(Error::Domain(format!(
                    "chain nonlinearity g_{} must vanish at the origin, got {v}",
                    i + 1
                )));
            }
        }
        Ok(spec)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lipschitz(&self) -> &[f64] {
        &self.lipschitz
    }

    /// Declared `alpha1..alpha4`.
    pub fn alphas(&self) -> [f64; 4] {
        self.alphas
    }

    /// Declared sup of `phi1(w1)` over the bounded-noise range.
    pub fn phi1_sup(&self) -> f64 {
        self.phi1_sup
    }

    pub fn eval_f(&self, t: f64, x: &[f64], w1: f64, w2: f64) -> f64 {
        (self.f)(t, x, w1, w2)
    }

    /// `g_{i+1}` applied to the first `i+1` states (0-based `i`).
    pub fn eval_g(&self, i: usize, prefix: &[f64]) -> f64 {
        (self.g[i])(prefix)
    }

    /// Spot-checks `|g_i(a) - g_i(b)| <= L_i ||a - b||` on random pairs drawn
    /// from `[-range, range]`. A smoke check of declared metadata, not a proof.
    pub fn lipschitz_smoke_check(&self, seed: u64, samples: usize, range: f64) -> Result<()> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        for i in 0..self.n {
            let dim = i + 1;
            for _ in 0..samples {
                let a: Vec<f64> = (0..dim).map(|_| rng.random_range(-range..range)).collect();
                let b: Vec<f64> = (0..dim).map(|_| rng.random_range(-range..range)).collect();
                let dist: f64 =
                    a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
                let dg = (self.eval_g(i, &a) - self.eval_g(i, &b)).abs();
                if dg > self.lipschitz[i] * dist + 1e-9 {
                    return Err(Error::AssumptionViolation {
                        bound: format!("Lipschitz constant L_{}", i + 1),
                        detail: format!("|g({a:?}) - g({b:?})| = {dg} > {} * {dist}", self.lipschitz[i]),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Drift of the plant at `(t, x)` under control `u` and noises `(w1, w2)`.
///
/// Component `i < n`: `x_{i+1} + g_i(x_1..x_i)`; component `n`:
/// `f(t, x, w1, w2) + g_n(x) + u` (summed left to right in that order, so
/// `total_disturbance + g_n + u` reproduces it bit-for-bit).
pub fn plant_drift(
    spec: &SystemSpec,
    t: f64,
    x: &[f64],
    u: f64,
    w1: f64,
    w2: f64,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; spec.n()];
    plant_drift_into(spec, t, x, u, w1, w2, &mut out)?;
    Ok(out)
}

/// Allocation-free form of [`plant_drift`] for the integrator hot loop.
pub fn plant_drift_into(
    spec: &SystemSpec,
    t: f64,
    x: &[f64],
    u: f64,
    w1: f64,
    w2: f64,
    out: &mut [f64],
) -> Result<()> {
    let n = spec.n();
    if x.len() != n || out.len() != n {
        return Err(Error::InvalidDimension(format!(
            "state and output must have length n = {n}, got {} and {}",
            x.len(),
            out.len()
        )));
    }
    for i in 0..n - 1 {
        out[i] = x[i + 1] + spec.eval_g(i, &x[..=i]);
    }
    out[n - 1] = spec.eval_f(t, x, w1, w2) + spec.eval_g(n - 1, x) + u;
    Ok(())
}

/// The true extended state `x_{n+1}(t) = f(t, x, w1, w2)`, recorded alongside
/// trajectories as the ground truth for estimation-error measurement.
pub fn total_disturbance(spec: &SystemSpec, t: f64, x: &[f64], w1: f64, w2: f64) -> Result<f64> {
    if x.len() != spec.n() {
        return Err(Error::InvalidDimension(format!(
            "state must have length n = {}, got {}",
            spec.n(),
            x.len()
        )));
    }
    Ok(spec.eval_f(t, x, w1, w2))
}
