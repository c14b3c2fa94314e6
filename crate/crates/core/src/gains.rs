//! Observer/controller gain structures and design certification.
//!
//! Builds the companion matrices behind the high-gain observer and the scaled
//! output-feedback controller, solves the associated Lyapunov equations,
//! derives the event dwell times, evaluates the sampling-error coefficient
//! bounds, and checks the inequalities a gain design must satisfy.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plant::SystemSpec;

/// Margin used by the Hurwitz test: all eigenvalue real parts must lie below
/// `-HURWITZ_MARGIN`. Keeps marginally stable matrices from flapping between
/// verdicts across eigensolver runs.
pub const HURWITZ_MARGIN: f64 = 1e-9;

/// Frobenius-norm tolerance on `Q A + A^T Q + I` accepted from the Lyapunov solver.
pub const LYAPUNOV_RESIDUAL_TOL: f64 = 1e-10;

/// Which gain structure a companion matrix encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompanionKind {
    /// `(n+1) x (n+1)`: first column `-lambda_i`, ones on the superdiagonal.
    ObserverGain,
    /// `n x n`: ones on the superdiagonal, last row `c_1..c_n`.
    ControllerGain,
}

/// A gain companion matrix together with the structural pattern it satisfies.
#[derive(Debug, Clone, PartialEq)]
pub struct CompanionMatrix {
    kind: CompanionKind,
    matrix: DMatrix<f64>,
}

impl CompanionMatrix {
    pub fn kind(&self) -> CompanionKind {
        self.kind
    }

    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn is_hurwitz(&self) -> bool {
        // Structural pattern guarantees squareness.
        is_hurwitz(&self.matrix).expect("companion matrix is square")
    }

    /// Coefficients of the characteristic polynomial, highest power first,
    /// monic. Exact for companion structure (no eigensolver involved).
    pub fn characteristic_coefficients(&self) -> Vec<f64> {
        let m = self.dimension();
        let mut coeffs = Vec::with_capacity(m + 1);
        coeffs.push(1.0);
        match self.kind {
            // det(sI - H) = s^m + lambda_1 s^(m-1) + ... + lambda_m
            CompanionKind::ObserverGain => {
                for i in 0..m {
                    coeffs.push(-self.matrix[(i, 0)]);
                }
            }
            // det(sI - J) = s^n - c_n s^(n-1) - ... - c_1
            CompanionKind::ControllerGain => {
                for i in (0..m).rev() {
                    coeffs.push(-self.matrix[(m - 1, i)]);
                }
            }
        }
        coeffs
    }
}

/// Builds the observer companion matrix from `lambda_1..lambda_{n+1}`:
/// first column `-lambda_i`, ones on the superdiagonal, zeros elsewhere.
pub fn build_h(lambdas: &[f64]) -> Result<CompanionMatrix> {
    let m = lambdas.len();
    if m < 2 {
        return Err(Error::InvalidDimension(format!(
            "observer gain vector needs length >= 2, got {m}"
        )));
    }
    let mut h = DMatrix::<f64>::zeros(m, m);
    for (i, &l) in lambdas.iter().enumerate() {
        h[(i, 0)] = -l;
        if i + 1 < m {
            h[(i, i + 1)] = 1.0;
        }
    }
    Ok(CompanionMatrix { kind: CompanionKind::ObserverGain, matrix: h })
}

/// Builds the controller companion matrix from `c_1..c_n`:
/// ones on the superdiagonal, last row `c_1..c_n`, zeros elsewhere.
pub fn build_j(cs: &[f64]) -> Result<CompanionMatrix> {
    let n = cs.len();
    if n < 1 {
        return Err(Error::InvalidDimension("controller gain vector must be nonempty".into()));
    }
    let mut j = DMatrix::<f64>::zeros(n, n);
    for i in 0..n.saturating_sub(1) {
        j[(i, i + 1)] = 1.0;
    }
    for (i, &c) in cs.iter().enumerate() {
        j[(n - 1, i)] = c;
    }
    Ok(CompanionMatrix { kind: CompanionKind::ControllerGain, matrix: j })
}

/// True iff every eigenvalue real part is below `-HURWITZ_MARGIN`.
pub fn is_hurwitz(a: &DMatrix<f64>) -> Result<bool> {
    if !a.is_square() {
        return Err(Error::InvalidDimension(format!(
            "Hurwitz test needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let eigs = a.clone().complex_eigenvalues();
    Ok(eigs.iter().all(|e| e.re < -HURWITZ_MARGIN))
}

/// Solution of `Q A + A^T Q = -I` with its quality metrics.
#[derive(Debug, Clone)]
pub struct LyapunovSolution {
    pub q: DMatrix<f64>,
    pub residual_norm: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

/// Solves the Lyapunov equation `Q A + A^T Q = -I` for Hurwitz `A`.
///
/// Uses the vectorized (Kronecker) linear system, adequate at the dimensions
/// this crate works with (n <= 10). The result is residual-checked and must
/// be symmetric positive definite.
pub fn solve_lyapunov(a: &DMatrix<f64>) -> Result<LyapunovSolution> {
    if !is_hurwitz(a)? {
        return Err(Error::NotHurwitz(
            "Lyapunov equation Q A + A^T Q = -I has a positive definite solution only for Hurwitz A"
                .into(),
        ));
    }
    let m = a.nrows();
    let at = a.transpose();
    let eye = DMatrix::<f64>::identity(m, m);
    // vec(Q A) = (A^T (x) I) vec(Q), vec(A^T Q) = (I (x) A^T) vec(Q), column-major vec.
    let k = at.kronecker(&eye) + eye.kronecker(&at);
    let mut rhs = nalgebra::DVector::<f64>::zeros(m * m);
    for i in 0..m {
        rhs[i * m + i] = -1.0;
    }
    let sol = k
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NumericalFailure("singular Kronecker system in Lyapunov solve".into()))?;
    let mut q = DMatrix::<f64>::zeros(m, m);
    for j in 0..m {
        for i in 0..m {
            q[(i, j)] = sol[j * m + i];
        }
    }
    let asym = (&q - q.transpose()).norm();
    if asym > 1e-12 {
        return Err(Error::NumericalFailure(format!(
            "Lyapunov solution asymmetry {asym} exceeds 1e-12"
        )));
    }
    let q = (&q + q.transpose()) * 0.5;
    let residual = (&q * a + a.transpose() * &q + DMatrix::<f64>::identity(m, m)).norm();
    if residual > LYAPUNOV_RESIDUAL_TOL {
        return Err(Error::NumericalFailure(format!(
            "Lyapunov residual {residual} exceeds {LYAPUNOV_RESIDUAL_TOL}"
        )));
    }
    let eigs = q.clone().symmetric_eigenvalues();
    let lambda_min = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
    let lambda_max = eigs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lambda_min <= 0.0 {
        return Err(Error::NumericalFailure(format!(
            "Lyapunov solution not positive definite (lambda_min = {lambda_min})"
        )));
    }
    Ok(LyapunovSolution { q, residual_norm: residual, lambda_min, lambda_max })
}

/// Minimum inter-event (dwell) times enforced by the two triggering
/// mechanisms: `tau = eps1 * r^-(2n + 3/2)` for output transmissions and
/// `upsilon = eps2 * r^-(2n/3 + 1)` for control updates.
pub fn dwell_times(r: f64, n: usize, eps1: f64, eps2: f64) -> Result<(f64, f64)> {
    if !(r > 0.0) || n < 1 || !(eps1 > 0.0) || !(eps2 > 0.0) {
        return Err(Error::Domain(format!(
            "dwell_times needs r > 0, n >= 1, eps1 > 0, eps2 > 0 (got r={r}, n={n}, eps1={eps1}, eps2={eps2})"
        )));
    }
    let nf = n as f64;
    let tau = eps1 * r.powf(-(2.0 * nf + 1.5));
    let upsilon = eps2 * r.powf(-(2.0 * nf / 3.0 + 1.0));
    Ok((tau, upsilon))
}

/// Complete tuning of one closed-loop design: observer gains, controller
/// gains, the high-gain parameter `r`, the controller scale `theta`, and the
/// four free event-triggering parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignGains {
    lambdas: Vec<f64>,
    cs: Vec<f64>,
    r: f64,
    theta: f64,
    eps1: f64,
    kappa1: f64,
    eps2: f64,
    kappa2: f64,
}

impl DesignGains {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        lambdas: Vec<f64>,
        cs: Vec<f64>,
        r: f64,
        theta: f64,
        eps1: f64,
        kappa1: f64,
        eps2: f64,
        kappa2: f64,
    ) -> Result<Self> {
        if cs.is_empty() {
            return Err(Error::InvalidDimension("controller gain vector must be nonempty".into()));
        }
        if lambdas.len() != cs.len() + 1 {
            return Err(Error::InvalidDimension(format!(
                "observer gain vector must have length n+1 = {}, got {}",
                cs.len() + 1,
                lambdas.len()
            )));
        }
        if !(r > 0.0) {
            return Err(Error::Domain(format!("tuning gain r must be positive, got {r}")));
        }
        if !(theta >= 1.0) {
            return Err(Error::Domain(format!("theta must be >= 1, got {theta}")));
        }
        for (name, v) in [("eps1", eps1), ("kappa1", kappa1), ("eps2", eps2), ("kappa2", kappa2)] {
            if !(v > 0.0) {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self { lambdas, cs, r, theta, eps1, kappa1, eps2, kappa2 })
    }

    pub fn n(&self) -> usize {
        self.cs.len()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn cs(&self) -> &[f64] {
        &self.cs
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn eps1(&self) -> f64 {
        self.eps1
    }

    pub fn kappa1(&self) -> f64 {
        self.kappa1
    }

    pub fn eps2(&self) -> f64 {
        self.eps2
    }

    pub fn kappa2(&self) -> f64 {
        self.kappa2
    }

    /// Returns a copy with a different tuning gain (used by gain sweeps; dwell
    /// times and thresholds follow `r` automatically).
    pub fn with_r(&self, r: f64) -> Result<Self> {
        let mut d = self.clone();
        if !(r > 0.0) {
            return Err(Error::Domain(format!("tuning gain r must be positive, got {r}")));
        }
        d.r = r;
        Ok(d)
    }

    pub fn with_theta(&self, theta: f64) -> Self {
        let mut d = self.clone();
        d.theta = theta;
        d
    }

    /// `(tau, upsilon)` for this design.
    pub fn dwell_times(&self) -> (f64, f64) {
        dwell_times(self.r, self.n(), self.eps1, self.eps2)
            .expect("constructor enforced positivity")
    }

    /// Output-transmission trigger threshold `kappa1 * r^-(n + 1/2)`.
    pub fn etm1_threshold(&self) -> f64 {
        self.kappa1 * self.r.powf(-(self.n() as f64 + 0.5))
    }

    /// Control-update trigger threshold `kappa2 * r^-1/2`.
    pub fn etm2_threshold(&self) -> f64 {
        self.kappa2 * self.r.powf(-0.5)
    }

    /// `max_i |c_i|` over `i = 1..n+1` with the convention `c_{n+1} = 1`.
    pub fn max_c_abs(&self) -> f64 {
        self.cs.iter().fold(1.0_f64, |m, c| m.max(c.abs()))
    }

    /// `max_i c_i^2` over `i = 1..n+1` with `c_{n+1} = 1`.
    pub fn max_c_sq(&self) -> f64 {
        let m = self.max_c_abs();
        m * m
    }

    /// `upsilon * theta^n * max|c_i|`; must stay below 1 for the sampling-error
    /// bounds to hold.
    pub fn dwell_product(&self) -> f64 {
        let (_, upsilon) = self.dwell_times();
        upsilon * self.theta.powi(self.n() as i32) * self.max_c_abs()
    }
}

/// Outcome of the four design checks. Failures are reported, not raised.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub h_hurwitz: bool,
    pub j_hurwitz: bool,
    pub theta: f64,
    /// `2 lambda_max(Q1) sum L_i`; absent when `J` is not Hurwitz (no `Q1`).
    pub theta_threshold: Option<f64>,
    pub theta_ok: bool,
    pub dwell_product: f64,
    pub dwell_ok: bool,
    pub tau: f64,
    pub upsilon: f64,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.h_hurwitz && self.j_hurwitz && self.theta_ok && self.dwell_ok
    }
}

/// Runs the four design checks: `H` Hurwitz, `J` Hurwitz, the `theta`
/// threshold `theta > 2 lambda_max(Q1) sum L_i`, and the dwell product
/// `upsilon theta^n max|c_i| < 1`.
pub fn validate_design(design: &DesignGains, spec: &SystemSpec) -> Result<ValidationReport> {
    if design.n() != spec.n() {
        return Err(Error::InvalidDimension(format!(
            "design order {} does not match system order {}",
            design.n(),
            spec.n()
        )));
    }
    let h = build_h(design.lambdas())?;
    let j = build_j(design.cs())?;
    let h_hurwitz = h.is_hurwitz();
    let j_hurwitz = j.is_hurwitz();

    let (theta_threshold, theta_ok) = if j_hurwitz {
        let q1 = solve_lyapunov(j.matrix())?;
        let threshold = 2.0 * q1.lambda_max * spec.lipschitz().iter().sum::<f64>();
        (Some(threshold), design.theta() > threshold)
    } else {
        (None, false)
    };

    let dwell_product = design.dwell_product();
    let (tau, upsilon) = design.dwell_times();
    Ok(ValidationReport {
        h_hurwitz,
        j_hurwitz,
        theta: design.theta(),
        theta_threshold,
        theta_ok,
        dwell_product,
        dwell_ok: dwell_product < 1.0,
        tau,
        upsilon,
    })
}

/// Declared sup-bounds for the noise-dependent terms of the sampling-error
/// coefficient `Lambda_6`: `sup_t E|w2(t)|^2` and `sup_t (phi1(w1(t)))^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseMomentBounds {
    pub w2_sq_sup: f64,
    pub phi1_sq_sup: f64,
}

impl NoiseMomentBounds {
    /// Defaults: the colored-noise second moment is bounded by the larger of
    /// the stationary value `rho1 rho2` and the initial `w2(0)^2` (the moment
    /// moves monotonically between them), and the `phi1` bound comes from the
    /// system's declared sup.
    pub fn from_config(ou: &crate::noise::OuParams, spec: &SystemSpec) -> Self {
        Self {
            w2_sq_sup: ou.stationary_variance().max(ou.w2_init * ou.w2_init),
            phi1_sq_sup: spec.phi1_sup() * spec.phi1_sup(),
        }
    }
}

/// The six coefficients bounding the mean-square control-sampling error in
/// terms of state, scaled estimation error, and noise moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaCoefficients {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda4: f64,
    pub lambda5: f64,
    pub lambda6: f64,
}

impl LambdaCoefficients {
    pub fn as_array(&self) -> [f64; 6] {
        [self.lambda1, self.lambda2, self.lambda3, self.lambda4, self.lambda5, self.lambda6]
    }
}

// Shared denominator (1 - upsilon theta^n max|c_i|)^2 of all six coefficients.
fn lambda_denominator(upsilon: f64, design: &DesignGains) -> Result<f64> {
    let prod = upsilon * design.theta().powi(design.n() as i32) * design.max_c_abs();
    if prod >= 1.0 {
        return Err(Error::Precondition(format!(
            "dwell product upsilon theta^n max|c_i| = {prod} must be < 1"
        )));
    }
    let d = 1.0 - prod;
    Ok(d * d)
}

fn sum_lambda_sq(design: &DesignGains) -> f64 {
    design.lambdas().iter().map(|l| l * l).sum()
}

fn lambda1_coeff(upsilon: f64, design: &DesignGains, spec: &SystemSpec, denom: f64) -> f64 {
    let n = design.n() as f64;
    let theta2n = design.theta().powi(2 * design.n() as i32);
    let a2 = spec.alphas()[1];
    10.0 * (n + 1.0) * theta2n * (design.max_c_sq() + 4.0 * a2 * a2) * upsilon * upsilon / denom
}

fn lambda2_coeff(upsilon: f64, design: &DesignGains, spec: &SystemSpec, denom: f64) -> f64 {
    let n = design.n() as f64;
    let sum_l_sq: f64 = spec.lipschitz().iter().map(|l| l * l).sum();
    let a2 = spec.alphas()[1];
    10.0 * (n * (1.0 + sum_l_sq) + 4.0 * n * a2 * a2) * upsilon / denom
}

fn lambda3_coeff(upsilon: f64, tau: f64, r: f64, design: &DesignGains, spec: &SystemSpec, denom: f64) -> f64 {
    let n = design.n() as f64;
    let l1 = spec.lipschitz()[0];
    10.0 * (n + 1.0)
        * (1.0 + l1 * l1)
        * upsilon
        * upsilon
        * (upsilon + tau)
        * r.powi(2 * (design.n() as i32 + 1))
        * sum_lambda_sq(design)
        / denom
}

fn lambda4_coeff(upsilon: f64, design: &DesignGains, denom: f64) -> f64 {
    let n = design.n() as f64;
    let theta2n = design.theta().powi(2 * design.n() as i32);
    10.0 * (n + 1.0) * theta2n * design.max_c_sq() * upsilon * upsilon / denom
}

fn lambda5_coeff(upsilon: f64, r: f64, design: &DesignGains, spec: &SystemSpec, denom: f64) -> f64 {
    let n = design.n();
    let nf = n as f64;
    let scaled_l: f64 = spec
        .lipschitz()
        .iter()
        .enumerate()
        .map(|(idx, l)| {
            let i = idx + 1;
            l * l / r.powi(2 * (n as i32 + 1 - i as i32))
        })
        .sum();
    10.0 * (nf * (1.0 + scaled_l) + (nf + 1.0) * r * r * sum_lambda_sq(design)) * upsilon / denom
}

fn lambda6_coeff(
    upsilon: f64,
    r: f64,
    design: &DesignGains,
    spec: &SystemSpec,
    moments: &NoiseMomentBounds,
    denom: f64,
) -> f64 {
    let n = design.n() as f64;
    let theta2n = design.theta().powi(2 * design.n() as i32);
    let a1 = spec.alphas()[0];
    let a3 = spec.alphas()[2];
    let noise_part =
        (4.0 + 8.0 * n) * (a1 * a1 + a3 * a3 * moments.w2_sq_sup + moments.phi1_sq_sup);
    let trigger_part = r * (n + 1.0) * design.kappa1().powi(2) * sum_lambda_sq(design);
    10.0 * theta2n * upsilon * upsilon / denom * (noise_part + trigger_part)
}

/// Evaluates the six sampling-error coefficients at the given `(upsilon, tau, r)`.
///
/// Requires the dwell product `upsilon theta^n max|c_i| < 1`; every
/// coefficient carries a factor `upsilon` or `upsilon^2` and vanishes in the
/// `upsilon -> 0` limit.
pub fn lambda_coefficients(
    upsilon: f64,
    tau: f64,
    r: f64,
    design: &DesignGains,
    spec: &SystemSpec,
    moments: &NoiseMomentBounds,
) -> Result<LambdaCoefficients> {
    if !(upsilon >= 0.0) || !(tau >= 0.0) || !(r > 0.0) {
        return Err(Error::Domain(format!(
            "lambda_coefficients needs upsilon, tau >= 0 and r > 0 (got {upsilon}, {tau}, {r})"
        )));
    }
    let denom = lambda_denominator(upsilon, design)?;
    Ok(LambdaCoefficients {
        lambda1: lambda1_coeff(upsilon, design, spec, denom),
        lambda2: lambda2_coeff(upsilon, design, spec, denom),
        lambda3: lambda3_coeff(upsilon, tau, r, design, spec, denom),
        lambda4: lambda4_coeff(upsilon, design, denom),
        lambda5: lambda5_coeff(upsilon, r, design, spec, denom),
        lambda6: lambda6_coeff(upsilon, r, design, spec, moments, denom),
    })
}

/// Declared bounds on the stochastic rate of change of the total disturbance:
/// `E|drift|^2 <= beta1 + beta2 E||scaled state||^2 + beta3 E||scaled error||^2
/// + beta4 E||sampling error||^2`, and `|diffusion|^2 <= beta5`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceBounds {
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    pub beta4: f64,
    pub beta5: f64,
}

impl DisturbanceBounds {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("beta3", self.beta3),
            ("beta4", self.beta4),
            ("beta5", self.beta5),
        ] {
            if !(v > 0.0) {
                return Err(Error::Domain(format!("{name} must be strictly positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Free positive weights of the certification inequalities (the smaller they
/// are, the larger the certified gain tends to be).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificationWeights {
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
    pub mu4: f64,
}

impl CertificationWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in
            [("mu1", self.mu1), ("mu2", self.mu2), ("mu3", self.mu3), ("mu4", self.mu4)]
        {
            if !(v > 0.0) {
                return Err(Error::Domain(format!("{name} must be strictly positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Geometric search grid `r = grid_base * 2^k`, `k = 0..`, capped at `grid_cap`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifyConfig {
    pub grid_base: f64,
    pub grid_cap: f64,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self { grid_base: 1.0, grid_cap: (2.0_f64).powi(60) }
    }
}

/// Values of the certification inequalities at one candidate grid point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GammaValues {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub gamma4: f64,
    pub gamma5: f64,
    pub gamma6: f64,
    pub gamma7: f64,
    pub gamma_star: f64,
    /// Left-hand side of the base-gain inequality
    /// `gamma2 r / 2 - (sum theta^{n+1-i} c_i)^2 / mu1 - 2 lambda_max(Q2) sum L_i
    ///  - mu4 lambda_max(Q2)^2 beta3 - 1/mu4 - upsilon`.
    pub base_gain_margin: f64,
}

/// Result of the minimum-gain certification search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificationReport {
    pub success: bool,
    /// Certified minimum tuning gain, when the search succeeded.
    pub r_star: Option<f64>,
    /// Grid point at which all inequalities first held.
    pub grid_point: Option<f64>,
    pub grid_points_tested: u32,
    /// Names of the conditions that failed (at the last grid point tried, or
    /// the gain-independent ones detected up front).
    pub failed_conditions: Vec<String>,
    /// Inequality values at the successful grid point (or the last one tried).
    pub gammas: Option<GammaValues>,
}

fn gamma_values_at(
    rho: f64,
    design: &DesignGains,
    spec: &SystemSpec,
    betas: &DisturbanceBounds,
    mus: &CertificationWeights,
    q1: &LyapunovSolution,
    q2: &LyapunovSolution,
) -> Result<GammaValues> {
    let n = design.n();
    let theta = design.theta();
    let sum_l: f64 = spec.lipschitz().iter().sum();
    let (tau, upsilon) = dwell_times(rho, n, design.eps1(), design.eps2())?;

    let lmax1 = q1.lambda_max;
    let lmax2 = q2.lambda_max;
    let gamma1 = theta
        - 2.0 * lmax1 * sum_l
        - mus.mu1 * lmax1 * lmax1
        - mus.mu2 * lmax1 * lmax1
        - mus.mu4 * lmax2 * lmax2 * betas.beta2
        - 2.0 * upsilon
        - 2.0 * tau;
    let sum_abs_lambda: f64 = design.lambdas().iter().map(|l| l.abs()).sum();
    let gamma2 = 1.0 - mus.mu3 * lmax2 * lmax2 * sum_abs_lambda * sum_abs_lambda;

    let weighted_c: f64 = design
        .cs()
        .iter()
        .enumerate()
        .map(|(idx, c)| theta.powi((n - idx) as i32) * c)
        .sum::<f64>()
        + 1.0; // c_{n+1} = 1 contributes theta^0
    let base_gain_margin = gamma2 * rho / 2.0
        - weighted_c * weighted_c / mus.mu1
        - 2.0 * lmax2 * sum_l
        - mus.mu4 * lmax2 * lmax2 * betas.beta3
        - 1.0 / mus.mu4
        - upsilon;

    let gamma_star =
        theta.powi(2 * n as i32) / mus.mu2 * design.max_c_sq() + mus.mu4 * lmax2 * lmax2 * betas.beta4;

    let denom = lambda_denominator(upsilon, design)?;
    let gamma3 = gamma1 - gamma_star * lambda1_coeff(upsilon, design, spec, denom);
    let gamma4 = 1.0 - gamma_star * lambda2_coeff(upsilon, design, spec, denom);
    let gamma5 = 1.0 - design.eps1() / (mus.mu3 * rho.sqrt());
    let gamma6 = 1.0 - gamma_star * lambda3_coeff(upsilon, tau, rho, design, spec, denom);
    let gamma7 = 1.0 - gamma_star * lambda5_coeff(upsilon, rho, design, spec, denom);

    Ok(GammaValues {
        gamma1,
        gamma2,
        gamma3,
        gamma4,
        gamma5,
        gamma6,
        gamma7,
        gamma_star,
        base_gain_margin,
    })
}

fn failed_of(g: &GammaValues) -> Vec<String> {
    let mut failed = Vec::new();
    for (name, v) in [
        ("gamma1", g.gamma1),
        ("gamma2", g.gamma2),
        ("gamma3", g.gamma3),
        ("gamma4", g.gamma4),
        ("gamma5", g.gamma5),
        ("gamma6", g.gamma6),
        ("gamma7", g.gamma7),
        ("base_gain", g.base_gain_margin),
    ] {
        if !(v > 0.0) {
            failed.push(name.to_string());
        }
    }
    failed
}

/// Searches the geometric grid for the smallest gain at which every
/// certification inequality holds, and reports
/// `r_star = max(4 gamma* Lambda4(upsilon) / gamma2, eps1^2 / mu3^2, rho)`
/// at the first passing grid point `rho`.
///
/// Gain-independent violations (`gamma2 <= 0`, or a `theta` too small to make
/// `gamma1` positive at any gain) fail immediately. A grid exhausted without a
/// passing point yields a certification-failed report, not an error.
pub fn certify_r_star(
    design: &DesignGains,
    spec: &SystemSpec,
    betas: &DisturbanceBounds,
    mus: &CertificationWeights,
    cfg: &CertifyConfig,
) -> Result<CertificationReport> {
    betas.validate()?;
    mus.validate()?;
    if !(cfg.grid_base > 0.0) || !(cfg.grid_cap >= cfg.grid_base) {
        return Err(Error::Domain("certification grid must satisfy 0 < base <= cap".into()));
    }
    let report = validate_design(design, spec)?;
    if !report.all_pass() {
        return Err(Error::Precondition(format!(
            "design validation must pass before certification: {report:?}"
        )));
    }
    let q1 = solve_lyapunov(build_j(design.cs())?.matrix())?;
    let q2 = solve_lyapunov(build_h(design.lambdas())?.matrix())?;

    // Gain-independent checks first.
    let sum_abs_lambda: f64 = design.lambdas().iter().map(|l| l.abs()).sum();
    let gamma2 = 1.0 - mus.mu3 * q2.lambda_max * q2.lambda_max * sum_abs_lambda * sum_abs_lambda;
    if gamma2 <= 0.0 {
        return Ok(CertificationReport {
            success: false,
            r_star: None,
            grid_point: None,
            grid_points_tested: 0,
            failed_conditions: vec!["gamma2".into()],
            gammas: None,
        });
    }
    let sum_l: f64 = spec.lipschitz().iter().sum();
    let gamma1_limit = design.theta()
        - 2.0 * q1.lambda_max * sum_l
        - mus.mu1 * q1.lambda_max * q1.lambda_max
        - mus.mu2 * q1.lambda_max * q1.lambda_max
        - mus.mu4 * q2.lambda_max * q2.lambda_max * betas.beta2;
    if gamma1_limit <= 0.0 {
        return Ok(CertificationReport {
            success: false,
            r_star: None,
            grid_point: None,
            grid_points_tested: 0,
            failed_conditions: vec!["gamma1".into()],
            gammas: None,
        });
    }

    let mut tested = 0u32;
    let mut rho = cfg.grid_base;
    loop {
        // A small grid point can violate the dwell-product precondition of the
        // coefficient bounds; that disqualifies the point, not the search.
        let (g, failed) = match gamma_values_at(rho, design, spec, betas, mus, &q1, &q2) {
            Ok(g) => {
                let failed = failed_of(&g);
                (Some(g), failed)
            }
            Err(Error::Precondition(_)) => (None, vec!["dwell_product".to_string()]),
            Err(e) => return Err(e),
        };
        tested += 1;
        if failed.is_empty() {
            let g = g.expect("gamma values exist when no condition failed");
            let (_, upsilon) = dwell_times(rho, design.n(), design.eps1(), design.eps2())?;
            let denom = lambda_denominator(upsilon, design)?;
            let l4 = lambda4_coeff(upsilon, design, denom);
            let r_star = (4.0 * g.gamma_star * l4 / g.gamma2)
                .max(design.eps1() * design.eps1() / (mus.mu3 * mus.mu3))
                .max(rho);
            return Ok(CertificationReport {
                success: true,
                r_star: Some(r_star),
                grid_point: Some(rho),
                grid_points_tested: tested,
                failed_conditions: Vec::new(),
                gammas: Some(g),
            });
        }
        let next = rho * 2.0;
        if next > cfg.grid_cap {
            return Ok(CertificationReport {
                success: false,
                r_star: None,
                grid_point: None,
                grid_points_tested: tested,
                failed_conditions: failed,
                gammas: g,
            });
        }
        rho = next;
    }
}
