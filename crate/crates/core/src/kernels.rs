//! Covariance kernels of the driving Gaussian noise.
//!
//! A kernel `R(t, s) = E[G_t G_s]` is admissible when `R(0, t) = 0` and its
//! mixed derivative splits into a fractional part and a bounded perturbation,
//!
//! ```text
//! ∂²R/∂t∂s = C_β |t-s|^(2β-2) + Ψ(t, s),     |Ψ(t, s)| <= C'_β (ts)^(β-1),
//! ```
//!
//! for some `β ∈ (1/2, 1)`. Two families are shipped in closed form:
//! fractional Brownian motion (Ψ ≡ 0) and sub-fractional Brownian motion.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack allowed by [`check_assumption`].
pub const ASSUMPTION_TOL: f64 = 1e-9;

pub trait CovarianceKernel: Send + Sync {
    fn name(&self) -> &str;

    fn beta(&self) -> f64;

    fn c_beta(&self) -> f64;

    fn c_beta_prime(&self) -> f64;

    /// `R(t, s)`.
    fn covariance(&self, t: f64, s: f64) -> f64;

    /// Mixed derivative `∂²R/∂t∂s`, defined for `t != s`.
    fn phi(&self, t: f64, s: f64) -> f64;

    /// The perturbation `Ψ = φ - C_β|t-s|^(2β-2)`.
    fn psi(&self, t: f64, s: f64) -> f64 {
        self.phi(t, s) - self.c_beta() * (t - s).abs().powf(2.0 * self.beta() - 2.0)
    }

    /// Hurst index when the kernel is plain fBm, for which the fast
    /// circulant sampler applies.
    fn fbm_hurst(&self) -> Option<f64> {
        None
    }
}

fn check_hurst(h: f64) -> Result<()> {
    if h.is_finite() && h > 0.5 && h < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("Hurst index must lie in (1/2, 1), got {h}")))
    }
}

/// Fractional Brownian motion, `R(t,s) = ½(t^2H + s^2H - |t-s|^2H)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fbm {
    hurst: f64,
}

impl Fbm {
    pub fn new(hurst: f64) -> Result<Self> {
        check_hurst(hurst)?;
        Ok(Fbm { hurst })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }
}

impl CovarianceKernel for Fbm {
    fn name(&self) -> &str {
        "fbm"
    }

    fn beta(&self) -> f64 {
        self.hurst
    }

    fn c_beta(&self) -> f64 {
        self.hurst * (2.0 * self.hurst - 1.0)
    }

    fn c_beta_prime(&self) -> f64 {
        0.0
    }

    fn covariance(&self, t: f64, s: f64) -> f64 {
        let h2 = 2.0 * self.hurst;
        0.5 * (t.abs().powf(h2) + s.abs().powf(h2) - (t - s).abs().powf(h2))
    }

    fn phi(&self, t: f64, s: f64) -> f64 {
        self.c_beta() * (t - s).abs().powf(2.0 * self.hurst - 2.0)
    }

    fn psi(&self, _t: f64, _s: f64) -> f64 {
        0.0
    }

    fn fbm_hurst(&self) -> Option<f64> {
        Some(self.hurst)
    }
}

/// Sub-fractional Brownian motion,
/// `R(t,s) = t^2H + s^2H - ½[(t+s)^2H + |t-s|^2H]`.
///
/// Here `Ψ(t,s) = -H(2H-1)(t+s)^(2H-2)`, and since `t + s >= 2√(ts)` the
/// perturbation is bounded with `C'_β = H(2H-1) 2^(2H-2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubFbm {
    hurst: f64,
}

impl SubFbm {
    pub fn new(hurst: f64) -> Result<Self> {
        check_hurst(hurst)?;
        Ok(SubFbm { hurst })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }
}

impl CovarianceKernel for SubFbm {
    fn name(&self) -> &str {
        "subfbm"
    }

    fn beta(&self) -> f64 {
        self.hurst
    }

    fn c_beta(&self) -> f64 {
        self.hurst * (2.0 * self.hurst - 1.0)
    }

    fn c_beta_prime(&self) -> f64 {
        self.c_beta() * 2f64.powf(2.0 * self.hurst - 2.0)
    }

    fn covariance(&self, t: f64, s: f64) -> f64 {
        let h2 = 2.0 * self.hurst;
        let (t, s) = (t.abs(), s.abs());
        t.powf(h2) + s.powf(h2) - 0.5 * ((t + s).powf(h2) + (t - s).abs().powf(h2))
    }

    fn phi(&self, t: f64, s: f64) -> f64 {
        let e = 2.0 * self.hurst - 2.0;
        self.c_beta() * ((t - s).abs().powf(e) - (t + s).powf(e))
    }

    fn psi(&self, t: f64, s: f64) -> f64 {
        -self.c_beta() * (t + s).powf(2.0 * self.hurst - 2.0)
    }
}

/// Serialized kernel selection, e.g. `{"name": "fbm", "H": 0.7}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub name: KernelName,
    #[serde(rename = "H")]
    pub hurst: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelName {
    Fbm,
    Subfbm,
}

impl std::str::FromStr for KernelName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fbm" => Ok(KernelName::Fbm),
            "subfbm" => Ok(KernelName::Subfbm),
            other => Err(Error::Domain(format!("unknown kernel {other:?} (expected fbm or subfbm)"))),
        }
    }
}

/// One of the shipped kernel families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    Fbm(Fbm),
    SubFbm(SubFbm),
}

impl Kernel {
    pub fn fbm(hurst: f64) -> Result<Self> {
        Fbm::new(hurst).map(Kernel::Fbm)
    }

    pub fn subfbm(hurst: f64) -> Result<Self> {
        SubFbm::new(hurst).map(Kernel::SubFbm)
    }

    pub fn from_spec(spec: &KernelSpec) -> Result<Self> {
        match spec.name {
            KernelName::Fbm => Kernel::fbm(spec.hurst),
            KernelName::Subfbm => Kernel::subfbm(spec.hurst),
        }
    }

    pub fn spec(&self) -> KernelSpec {
        match self {
            Kernel::Fbm(k) => KernelSpec { name: KernelName::Fbm, hurst: k.hurst },
            Kernel::SubFbm(k) => KernelSpec { name: KernelName::Subfbm, hurst: k.hurst },
        }
    }

    fn inner(&self) -> &dyn CovarianceKernel {
        match self {
            Kernel::Fbm(k) => k,
            Kernel::SubFbm(k) => k,
        }
    }
}

impl CovarianceKernel for Kernel {
    fn name(&self) -> &str {
        self.inner().name()
    }
    fn beta(&self) -> f64 {
        self.inner().beta()
    }
    fn c_beta(&self) -> f64 {
        self.inner().c_beta()
    }
    fn c_beta_prime(&self) -> f64 {
        self.inner().c_beta_prime()
    }
    fn covariance(&self, t: f64, s: f64) -> f64 {
        self.inner().covariance(t, s)
    }
    fn phi(&self, t: f64, s: f64) -> f64 {
        self.inner().phi(t, s)
    }
    fn psi(&self, t: f64, s: f64) -> f64 {
        self.inner().psi(t, s)
    }
    fn fbm_hurst(&self) -> Option<f64> {
        self.inner().fbm_hurst()
    }
}

/// Uniform time grid `t_i = i·dt`, `i = 0..=n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    n: usize,
    dt: f64,
}

impl Grid {
    pub fn new(n: usize, dt: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("grid needs at least one step".into()));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Domain(format!("grid step must be positive, got {dt}")));
        }
        Ok(Grid { n, dt })
    }

    /// Grid covering `[0, horizon]` with step `dt`; `horizon / dt` must be an
    /// integer to within 1e-9.
    pub fn from_horizon(horizon: f64, dt: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::Domain(format!("horizon must be positive, got {horizon}")));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Domain(format!("grid step must be positive, got {dt}")));
        }
        let steps = horizon / dt;
        let n = steps.round();
        if (steps - n).abs() > 1e-9 * n.max(1.0) || n < 1.0 {
            return Err(Error::Domain(format!("horizon {horizon} is not a multiple of dt = {dt}")));
        }
        Grid::new(n as usize, dt)
    }

    pub fn steps(&self) -> usize {
        self.n
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    pub fn horizon(&self) -> f64 {
        self.time(self.n)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n).map(move |i| self.time(i))
    }

    /// Grid with the same horizon and `factor` times as many steps.
    pub fn refine(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::Domain("refinement factor must be positive".into()));
        }
        Grid::new(self.n * factor, self.dt / factor as f64)
    }
}

/// Covariance matrix of the increments `G_{t_{i+1}} - G_{t_i}`.
pub fn increment_covariance_matrix<K: CovarianceKernel + ?Sized>(kernel: &K, grid: &Grid) -> Result<DMatrix<f64>> {
    let n = grid.steps();
    let mut r = vec![0.0; (n + 1) * (n + 1)];
    for i in 0..=n {
        for j in i..=n {
            let (t, s) = (grid.time(i), grid.time(j));
            let v = kernel.covariance(t, s);
            if !v.is_finite() {
                return Err(Error::NonFinite { t, s });
            }
            r[i * (n + 1) + j] = v;
            r[j * (n + 1) + i] = v;
        }
    }
    let at = |i: usize, j: usize| r[i * (n + 1) + j];
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = at(i + 1, j + 1) - at(i + 1, j) - at(i, j + 1) + at(i, j);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AssumptionReport {
    /// `max |Ψ(t,s)| / (ts)^(β-1)` over distinct positive grid points.
    pub max_ratio: f64,
    pub worst_pair: (f64, f64),
    /// The kernel's declared `C'_β`.
    pub bound: f64,
    pub passes: bool,
}

/// Audits the perturbation bound on every pair of distinct positive grid
/// points.
pub fn check_assumption<K: CovarianceKernel + ?Sized>(kernel: &K, grid: &Grid) -> Result<AssumptionReport> {
    if grid.steps() < 2 {
        return Err(Error::Domain("assumption audit needs at least two positive grid points".into()));
    }
    let beta = kernel.beta();
    let mut max_ratio = 0.0f64;
    let mut worst_pair = (grid.time(1), grid.time(2));
    for i in 1..=grid.steps() {
        for j in (i + 1)..=grid.steps() {
            let (t, s) = (grid.time(i), grid.time(j));
            let ratio = kernel.psi(t, s).abs() / (t * s).powf(beta - 1.0);
            if ratio > max_ratio {
                max_ratio = ratio;
                worst_pair = (t, s);
            }
        }
    }
    let bound = kernel.c_beta_prime();
    Ok(AssumptionReport {
        max_ratio,
        worst_pair,
        bound,
        passes: max_ratio <= bound * (1.0 + ASSUMPTION_TOL),
    })
}

/// Constant `C` in `E(G_t - G_s)² <= C |t-s|^(2β)`.
///
/// Integrating the mixed derivative over `[s,t]²` gives
/// `C_β/(β(2β-1)) |t-s|^(2β)` from the fractional part and
/// `C'_β ((t^β - s^β)/β)² <= C'_β |t-s|^(2β) / β²` from the perturbation.
pub fn increment_bound_constant<K: CovarianceKernel + ?Sized>(kernel: &K) -> f64 {
    let b = kernel.beta();
    kernel.c_beta() / (b * (2.0 * b - 1.0)) + kernel.c_beta_prime() / (b * b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fbm_closed_form_values() {
        let k = Fbm::new(0.7).unwrap();
        assert_eq!(k.covariance(1.0, 1.0), 1.0);
        assert!((k.covariance(1.0, 2.0) - 1.319_507_910_772_894_3).abs() < 1e-14);
        assert!((k.c_beta() - 0.28).abs() < 1e-15);
        assert_eq!(k.c_beta_prime(), 0.0);
    }

    #[test]
    fn subfbm_closed_form_values() {
        let k = SubFbm::new(0.7).unwrap();
        assert!((k.covariance(1.0, 1.0) - 0.680_492_089_227_105_7).abs() < 1e-14);
        assert!((k.c_beta_prime() - 0.28 * 2f64.powf(-0.6)).abs() < 1e-15);
        let lhs = k.psi(1.0, 2.0).abs() / 2f64.powf(-0.3);
        assert!(lhs <= k.c_beta_prime());
    }

    #[test]
    fn hurst_domain_enforced() {
        for h in [0.5, 1.0, 0.3, f64::NAN, 1.2] {
            assert!(Fbm::new(h).is_err());
            assert!(SubFbm::new(h).is_err());
        }
    }

    #[test]
    fn origin_row_vanishes() {
        for k in [Kernel::fbm(0.6).unwrap(), Kernel::subfbm(0.9).unwrap()] {
            for t in [0.0, 0.3, 1.0, 17.5] {
                assert_eq!(k.covariance(0.0, t), 0.0);
            }
        }
    }

    #[test]
    fn phi_matches_finite_difference_of_covariance() {
        let h = 1e-4;
        for k in [Kernel::fbm(0.7).unwrap(), Kernel::subfbm(0.7).unwrap()] {
            for (t, s) in [(1.0, 2.0), (0.5, 3.0), (4.0, 1.5)] {
                let fd = (k.covariance(t + h, s + h) - k.covariance(t + h, s - h) - k.covariance(t - h, s + h)
                    + k.covariance(t - h, s - h))
                    / (4.0 * h * h);
                let exact = k.phi(t, s);
                assert!((fd - exact).abs() < 1e-5 * exact.abs().max(1.0), "{}: {fd} vs {exact}", k.name());
            }
        }
    }

    #[test]
    fn fbm_increment_matrix_entries() {
        let grid = Grid::new(8, 1.0).unwrap();
        let m = increment_covariance_matrix(&Fbm::new(0.7).unwrap(), &grid).unwrap();
        assert!((m[(0, 1)] - 0.319_507_910_772_894_3).abs() < 1e-13);
        let grid = Grid::new(8, 0.25).unwrap();
        let m = increment_covariance_matrix(&Fbm::new(0.7).unwrap(), &grid).unwrap();
        for i in 0..8 {
            assert!((m[(i, i)] - 0.25f64.powf(1.4)).abs() < 1e-13);
        }
    }

    #[test]
    fn increments_nearly_uncorrelated_close_to_brownian() {
        let grid = Grid::new(10, 0.1).unwrap();
        let m = increment_covariance_matrix(&Fbm::new(0.500_001).unwrap(), &grid).unwrap();
        for i in 0..10 {
            for j in 0..10 {
                if i != j {
                    assert!(m[(i, j)].abs() < 1e-6, "({i},{j}) = {}", m[(i, j)]);
                }
            }
        }
    }

    #[test]
    fn assumption_audit() {
        let grid = Grid::new(50, 0.1).unwrap();
        let fbm = check_assumption(&Fbm::new(0.7).unwrap(), &grid).unwrap();
        assert_eq!(fbm.max_ratio, 0.0);
        assert!(fbm.passes);

        let sub = SubFbm::new(0.7).unwrap();
        let report = check_assumption(&sub, &grid).unwrap();
        // brute force over the same pairs
        let mut brute = 0.0f64;
        for i in 1..=50 {
            for j in 1..=50 {
                if i != j {
                    let (t, s) = (i as f64 * 0.1, j as f64 * 0.1);
                    let psi = 0.28 * (t + s).powf(-0.6);
                    brute = brute.max(psi / (t * s).powf(-0.3));
                }
            }
        }
        assert!((report.max_ratio - brute).abs() < 1e-14);
        assert!(report.max_ratio <= 0.28 * 2f64.powf(-0.6));
        assert!(report.passes);
    }

    struct Inflated(Fbm);

    impl CovarianceKernel for Inflated {
        fn name(&self) -> &str {
            "inflated"
        }
        fn beta(&self) -> f64 {
            self.0.beta()
        }
        fn c_beta(&self) -> f64 {
            self.0.c_beta()
        }
        fn c_beta_prime(&self) -> f64 {
            0.0
        }
        fn covariance(&self, t: f64, s: f64) -> f64 {
            self.0.covariance(t, s)
        }
        fn phi(&self, t: f64, s: f64) -> f64 {
            2.0 * self.0.phi(t, s)
        }
    }

    #[test]
    fn inflated_kernel_fails_audit() {
        let grid = Grid::new(20, 0.1).unwrap();
        let report = check_assumption(&Inflated(Fbm::new(0.7).unwrap()), &grid).unwrap();
        assert!(!report.passes);
        assert!(report.max_ratio > 0.0);
    }

    #[test]
    fn grid_from_horizon() {
        let g = Grid::from_horizon(400.0, 0.05).unwrap();
        assert_eq!(g.steps(), 8000);
        assert!(Grid::from_horizon(1.0, 0.3).is_err());
        assert!(Grid::new(0, 0.1).is_err());
        assert!(Grid::new(3, -0.1).is_err());
    }

    #[test]
    fn spec_round_trip() {
        let spec: KernelSpec = serde_json::from_str(r#"{"name":"subfbm","H":0.65}"#).unwrap();
        let k = Kernel::from_spec(&spec).unwrap();
        assert_eq!(k.name(), "subfbm");
        assert_eq!(k.spec(), spec);
        assert!(serde_json::from_str::<KernelSpec>(r#"{"name":"fbm","H":0.7,"x":1}"#).is_err());
    }
}
