//! Drift estimators for the Vasicek model and their limiting constants.
//!
//! From one path on `[0, T]`:
//!
//! * `μ̂ = (1/T) ∫ X dt`
//! * `k̂ = [ ((1/T)∫X² dt - μ̂²) / (C_β Γ(2β-1)) ]^{-1/(2β)}`, inverting the
//!   ergodic variance `a = C_β Γ(2β-1) k^{-2β}`
//! * the least-squares pair
//!
//! ```text
//! k̂_LS = (X_T ∫X dt - T ∫X dX) / (T ∫X² dt - (∫X dt)²)
//! μ̂_LS = (X_T ∫X² dt - ∫X dX ∫X dt) / (X_T ∫X dt - T ∫X dX)
//! ```
//!
//! where `∫X dX` is a divergence (Skorohod) integral. It is not observable
//! from the path; it equals the pathwise (Young) integral `X_T²/2` minus the
//! deterministic trace
//!
//! ```text
//! C(T) = σ² ∫_0^T ∫_0^t e^{-k(t-s)} φ(s,t) ds dt
//! ```
//!
//! which needs `k`. [`IntegralMode`] selects how that is handled.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::CovarianceKernel;
use crate::quad::{integrate_endpoint_singular, Tolerance};
use crate::special::gamma;
use crate::vasicek::{VasicekParams, VasicekPath};

/// Relative accuracy requested from the correction quadrature.
pub const CORRECTION_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegralMode {
    /// Uncorrected pathwise integral. Observable, but the LS estimator of `k`
    /// built on it tends to zero.
    Pathwise,
    /// Skorohod integral using the true `k` in the correction.
    SkorohodOracle,
    /// Skorohod integral using the moment estimate `k̂` in the correction.
    SkorohodPlugin,
}

impl IntegralMode {
    pub const ALL: [IntegralMode; 3] = [IntegralMode::Pathwise, IntegralMode::SkorohodOracle, IntegralMode::SkorohodPlugin];

    pub fn as_str(&self) -> &'static str {
        match self {
            IntegralMode::Pathwise => "pathwise",
            IntegralMode::SkorohodOracle => "skorohod_oracle",
            IntegralMode::SkorohodPlugin => "skorohod_plugin",
        }
    }
}

impl std::fmt::Display for IntegralMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for IntegralMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        IntegralMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Domain(format!("unknown integral mode {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Diagnostics {
    pub mean_x: f64,
    pub mean_x2: f64,
    /// The value used for `∫X dX`.
    pub xdx: f64,
    /// Trace term subtracted from the pathwise integral (zero in pathwise mode).
    pub correction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateSet {
    pub mu_hat: f64,
    pub k_hat: f64,
    pub mu_ls: f64,
    pub k_ls: f64,
    pub mode: IntegralMode,
    pub diagnostics: Diagnostics,
}

/// Trapezoid rule on a uniform grid.
pub fn integral_trapezoid(values: &[f64], dt: f64) -> f64 {
    match values {
        [] | [_] => 0.0,
        [first, inner @ .., last] => dt * (0.5 * (first + last) + inner.iter().sum::<f64>()),
    }
}

/// Time integrals of a path, computed once and shared by all estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathIntegrals {
    pub horizon: f64,
    pub int_x: f64,
    pub int_x2: f64,
    pub x_start: f64,
    pub x_end: f64,
}

impl PathIntegrals {
    pub fn of(path: &VasicekPath) -> Self {
        let dt = path.grid.dt();
        let squares: Vec<f64> = path.values.iter().map(|x| x * x).collect();
        PathIntegrals {
            horizon: path.horizon(),
            int_x: integral_trapezoid(&path.values, dt),
            int_x2: integral_trapezoid(&squares, dt),
            x_start: path.values[0],
            x_end: *path.values.last().expect("non-empty path"),
        }
    }

    pub fn mean_x(&self) -> f64 {
        self.int_x / self.horizon
    }

    pub fn mean_x2(&self) -> f64 {
        self.int_x2 / self.horizon
    }

    /// `(1/T)∫X² - ((1/T)∫X)²`.
    pub fn sample_variance(&self) -> f64 {
        self.mean_x2() - self.mean_x() * self.mean_x()
    }

    /// Pathwise `∫X dX = (X_T² - X_0²)/2`.
    pub fn xdx_young(&self) -> f64 {
        0.5 * (self.x_end * self.x_end - self.x_start * self.x_start)
    }
}

pub fn mu_hat(path: &VasicekPath) -> f64 {
    PathIntegrals::of(path).mean_x()
}

/// Ergodic variance `a = C_β Γ(2β-1) k^{-2β}` of the unit-noise solution.
pub fn stationary_variance<K: CovarianceKernel + ?Sized>(kernel: &K, k: f64) -> f64 {
    let b = kernel.beta();
    kernel.c_beta() * gamma(2.0 * b - 1.0) * k.powf(-2.0 * b)
}

/// Inverts `v = σ² C_β Γ(2β-1) k^{-2β}` for `k`.
pub fn k_from_variance<K: CovarianceKernel + ?Sized>(variance: f64, sigma: f64, kernel: &K) -> Result<f64> {
    if variance.is_nan() || variance <= 0.0 {
        return Err(Error::NonPositiveVariance(variance));
    }
    let b = kernel.beta();
    let scale = sigma * sigma * kernel.c_beta() * gamma(2.0 * b - 1.0);
    Ok((variance / scale).powf(-1.0 / (2.0 * b)))
}

/// Moment estimator of the mean-reversion speed.
pub fn k_hat<K: CovarianceKernel + ?Sized>(path: &VasicekPath, kernel: &K) -> Result<f64> {
    k_from_variance(PathIntegrals::of(path).sample_variance(), path.params.sigma, kernel)
}

/// Forward (left-point) sum `Σ X_i (X_{i+1} - X_i)`.
///
/// Equals `½X_T² - ½X_0² - ½Σ(ΔX_i)²`; the last term is a discretization
/// artifact that vanishes only like `Δ^{2β-1}`.
pub fn xdx_forward(path: &VasicekPath) -> f64 {
    path.values.windows(2).map(|w| w[0] * (w[1] - w[0])).sum()
}

/// Pathwise integral `∫X dX` with the forward-sum artifact removed:
/// `xdx_forward + ½Σ(ΔX)² = ½(X_T² - X_0²)`.
pub fn xdx_young(path: &VasicekPath) -> f64 {
    let x0 = path.values[0];
    let xt = *path.values.last().expect("non-empty path");
    0.5 * (xt * xt - x0 * x0)
}

fn check_correction_args(k: f64, horizon: f64) -> Result<()> {
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::Domain(format!("k must be positive, got {k}")));
    }
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(Error::Domain(format!("horizon must be nonnegative, got {horizon}")));
    }
    Ok(())
}

/// Trace term `C(T) = ∫_0^T ∫_0^t e^{-k(t-s)} φ(s,t) ds dt` for unit noise.
///
/// When the perturbation vanishes (`C'_β = 0`), Fubini reduces this to
/// `C_β ∫_0^T (T-u) e^{-ku} u^{2β-2} du`; otherwise the triangle is
/// integrated in two dimensions by [`skorohod_correction_general`].
pub fn skorohod_correction<K: CovarianceKernel + ?Sized>(kernel: &K, k: f64, horizon: f64) -> Result<f64> {
    check_correction_args(k, horizon)?;
    if kernel.c_beta_prime() != 0.0 {
        return skorohod_correction_general(kernel, k, horizon);
    }
    let b = kernel.beta();
    let est = integrate_endpoint_singular(
        |u: f64| (horizon - u) * (-k * u).exp(),
        2.0 * b - 2.0,
        horizon,
        Tolerance::relative(CORRECTION_REL_TOL),
    )?;
    Ok(kernel.c_beta() * est.value)
}

/// Two-dimensional evaluation of the trace term for any kernel.
///
/// In lag coordinates `u = t - s` the inner integral
/// `∫_0^t e^{-ku} φ(t-u, t) du` carries the diagonal singularity
/// `u^{2β-2}`, which is split off exactly (`φ = C_β u^{2β-2} + Ψ`) and
/// absorbed by a power substitution.
/// The inner result scales like `t^{2β-1}` near the origin, which the outer
/// integral absorbs the same way.
pub fn skorohod_correction_general<K: CovarianceKernel + ?Sized>(kernel: &K, k: f64, horizon: f64) -> Result<f64> {
    check_correction_args(k, horizon)?;
    let b = kernel.beta();
    let tol = Tolerance::relative(CORRECTION_REL_TOL);
    let inner_tol = Tolerance::relative(CORRECTION_REL_TOL * 1e-2);
    let c = kernel.c_beta();
    let inner_failed = std::cell::Cell::new(None);
    let reduced = |t: f64| -> f64 {
        let est = integrate_endpoint_singular(
            |u: f64| (-k * u).exp() * (c + kernel.psi(t - u, t) * u.powf(2.0 - 2.0 * b)),
            2.0 * b - 2.0,
            t,
            inner_tol,
        );
        match est {
            Ok(e) => e.value / t.powf(2.0 * b - 1.0),
            Err(err) => {
                inner_failed.set(Some(err.to_string()));
                f64::NAN
            }
        }
    };
    let outer = integrate_endpoint_singular(reduced, 2.0 * b - 1.0, horizon, tol);
    if let Some(msg) = inner_failed.take() {
        return Err(Error::Domain(format!("inner correction quadrature failed: {msg}")));
    }
    Ok(outer?.value)
}

/// `e^{-kT} ∫_0^T e^{kr} r^{β-1} dr`, which stays bounded by `C(1 ∧ T^{β-1})`.
pub fn damped_power_integral(k: f64, beta: f64, horizon: f64) -> Result<f64> {
    check_correction_args(k, horizon)?;
    let est = integrate_endpoint_singular(
        |r: f64| (-k * (horizon - r)).exp(),
        beta - 1.0,
        horizon,
        Tolerance::relative(1e-10),
    )?;
    Ok(est.value)
}

/// Almost-sure limit of `(1/T)∫X dX` in the Skorohod sense, `-k a`.
pub fn ergodic_xdx_limit<K: CovarianceKernel + ?Sized>(kernel: &K, k: f64) -> f64 {
    -k * stationary_variance(kernel, k)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LsEstimates {
    pub k_ls: f64,
    pub mu_ls: f64,
    pub xdx: f64,
    pub correction: f64,
}

fn ls_from_integrals(ints: &PathIntegrals, xdx: f64) -> Result<(f64, f64)> {
    let t = ints.horizon;
    let den = t * ints.int_x2 - ints.int_x * ints.int_x;
    if !(den > 0.0 && den.is_finite()) {
        return Err(Error::DegenerateDesign(format!("T∫X² - (∫X)² = {den:e}")));
    }
    let num = ints.x_end * ints.int_x - t * xdx;
    if num == 0.0 || !num.is_finite() {
        return Err(Error::DegenerateDesign(format!("X_T∫X - T∫XdX = {num:e}")));
    }
    let k_ls = num / den;
    let mu_ls = (ints.x_end * ints.int_x2 - xdx * ints.int_x) / num;
    Ok((k_ls, mu_ls))
}

/// Least-squares estimates under the chosen interpretation of `∫X dX`.
///
/// The pathwise part is always `½(X_T² - X_0²)`; the Skorohod modes subtract
/// `σ² C(T)` evaluated at the true `k` (oracle) or at `k̂` (plug-in).
pub fn ls_estimates<K: CovarianceKernel + ?Sized>(
    path: &VasicekPath,
    mode: IntegralMode,
    kernel: &K,
    k_for_correction: Option<f64>,
) -> Result<LsEstimates> {
    let ints = PathIntegrals::of(path);
    let correction_k = match mode {
        IntegralMode::Pathwise => None,
        IntegralMode::SkorohodOracle => Some(k_for_correction.ok_or_else(|| {
            Error::Domain("skorohod_oracle mode needs the true k for the correction".into())
        })?),
        IntegralMode::SkorohodPlugin => Some(k_from_variance(ints.sample_variance(), path.params.sigma, kernel)?),
    };
    let correction = match correction_k {
        None => 0.0,
        Some(k) => path.params.sigma.powi(2) * skorohod_correction(kernel, k, ints.horizon)?,
    };
    ls_with_correction(&ints, correction)
}

/// LS estimates from precomputed integrals and a given correction.
pub fn ls_with_correction(ints: &PathIntegrals, correction: f64) -> Result<LsEstimates> {
    let xdx = ints.xdx_young() - correction;
    let (k_ls, mu_ls) = ls_from_integrals(ints, xdx)?;
    Ok(LsEstimates { k_ls, mu_ls, xdx, correction })
}

/// All four estimates from one path.
pub fn estimate<K: CovarianceKernel + ?Sized>(
    path: &VasicekPath,
    kernel: &K,
    mode: IntegralMode,
    k_for_correction: Option<f64>,
) -> Result<EstimateSet> {
    let ints = PathIntegrals::of(path);
    let k_hat = k_from_variance(ints.sample_variance(), path.params.sigma, kernel)?;
    let ls = ls_estimates(path, mode, kernel, k_for_correction)?;
    let set = EstimateSet {
        mu_hat: ints.mean_x(),
        k_hat,
        mu_ls: ls.mu_ls,
        k_ls: ls.k_ls,
        mode,
        diagnostics: Diagnostics {
            mean_x: ints.mean_x(),
            mean_x2: ints.mean_x2(),
            xdx: ls.xdx,
            correction: ls.correction,
        },
    };
    if [set.mu_hat, set.k_hat, set.mu_ls, set.k_ls].iter().all(|v| v.is_finite()) {
        Ok(set)
    } else {
        Err(Error::DegenerateDesign("non-finite estimate".into()))
    }
}

/// Limiting constants of the central limit theorems, for unit noise.
///
/// The variance of `√T(k̂ - k)` appears in three incompatible forms in the
/// source derivation; all are kept so the Monte Carlo harness can compare
/// them against data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticConstants {
    pub a: f64,
    pub sigma_beta_sq: f64,
    /// `1/k²`, for both `T^{1-β}(μ̂ - μ)` and `T^{1-β}(μ̂_LS - μ)`.
    pub var_mu: f64,
    /// `σ_β² k / (4β²)`.
    pub var_k_moment_thm: f64,
    /// `a² σ_β² / (4β²)`.
    pub var_k_moment_prop: f64,
    /// `a² σ_β² / k`.
    pub var_k_moment_proof: f64,
    /// `4 k a² σ_β²`.
    pub var_k_ls: f64,
}

/// `σ_β² = (4β-1)[1 + Γ(3-4β)Γ(4β-1) / (Γ(2β)Γ(2-2β))]`, finite for β < 3/4.
pub fn sigma_beta_sq(beta: f64) -> Result<f64> {
    if !(beta > 0.5 && beta < 0.75) {
        return Err(Error::Domain(format!("σ_β² requires β in (1/2, 3/4), got {beta}")));
    }
    let ratio = gamma(3.0 - 4.0 * beta) * gamma(4.0 * beta - 1.0) / (gamma(2.0 * beta) * gamma(2.0 - 2.0 * beta));
    Ok((4.0 * beta - 1.0) * (1.0 + ratio))
}

pub fn asymptotic_constants<K: CovarianceKernel + ?Sized>(kernel: &K, k: f64) -> Result<AsymptoticConstants> {
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::Domain(format!("k must be positive, got {k}")));
    }
    let b = kernel.beta();
    let s2 = sigma_beta_sq(b)?;
    let a = stationary_variance(kernel, k);
    Ok(AsymptoticConstants {
        a,
        sigma_beta_sq: s2,
        var_mu: 1.0 / (k * k),
        var_k_moment_thm: s2 * k / (4.0 * b * b),
        var_k_moment_prop: a * a * s2 / (4.0 * b * b),
        var_k_moment_proof: a * a * s2 / k,
        var_k_ls: 4.0 * k * a * a * s2,
    })
}

/// Estimation errors multiplied by their CLT rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledErrors {
    pub e_mu: f64,
    pub e_mu_ls: f64,
    pub e_k: f64,
    pub e_k_ls: f64,
}

pub fn mu_rate(horizon: f64, beta: f64) -> f64 {
    horizon.powf(1.0 - beta)
}

pub fn k_rate(horizon: f64) -> f64 {
    horizon.sqrt()
}

pub fn scaled_errors(est: &EstimateSet, truth: &VasicekParams, horizon: f64, beta: f64) -> ScaledErrors {
    let rm = mu_rate(horizon, beta);
    let rk = k_rate(horizon);
    ScaledErrors {
        e_mu: rm * (est.mu_hat - truth.mu),
        e_mu_ls: rm * (est.mu_ls - truth.mu),
        e_k: rk * (est.k_hat - truth.k),
        e_k_ls: rk * (est.k_ls - truth.k),
    }
}
