//! Vasicek paths `dX = k(μ - X)dt + σ dG`, `X_0 = 0`, built from a sampled
//! noise path.
//!
//! The solution is `X_t = μ(1 - e^{-kt}) + σ ∫_0^t e^{-k(t-s)} dG_s`. Over one
//! step the drift part is propagated exactly and the stochastic convolution
//! is approximated at the step midpoint:
//!
//! ```text
//! X_{i+1} = e^{-kΔ} X_i + μ(1 - e^{-kΔ}) + σ e^{-kΔ/2} (G_{i+1} - G_i)
//! ```
//!
//! Since the noise is Hölder of order above 1/2, the integral is a
//! Riemann–Stieltjes (Young) integral and no Itô correction appears.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::Grid;
use crate::sampler::GaussianPath;

/// Largest allowed `k·Δ`.
pub const MAX_STIFFNESS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VasicekParams {
    pub k: f64,
    pub mu: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
}

fn default_sigma() -> f64 {
    1.0
}

impl VasicekParams {
    pub fn new(k: f64, mu: f64, sigma: f64) -> Result<Self> {
        let p = VasicekParams { k, mu, sigma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k.is_finite() && self.k > 0.0) {
            return Err(Error::Domain(format!("mean-reversion speed k must be positive, got {}", self.k)));
        }
        if !self.mu.is_finite() {
            return Err(Error::Domain(format!("long-run mean must be finite, got {}", self.mu)));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::Domain(format!("noise scale sigma must be positive, got {}", self.sigma)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ExactRecursion,
    Euler,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VasicekPath {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub params: VasicekParams,
    pub scheme: Scheme,
}

impl VasicekPath {
    pub fn horizon(&self) -> f64 {
        self.grid.horizon()
    }

    /// Path from observed values on a uniform grid (e.g. read from disk).
    pub fn from_observations(grid: Grid, values: Vec<f64>, params: VasicekParams) -> Result<Self> {
        if values.len() != grid.steps() + 1 {
            return Err(Error::Shape(format!("{} values for a grid of {} steps", values.len(), grid.steps())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!("non-finite observation at index {i}")));
        }
        Ok(VasicekPath { grid, values, params, scheme: Scheme::ExactRecursion })
    }

    /// Writes `t,G,X` rows.
    pub fn write_csv<W: Write>(&self, noise: &GaussianPath, out: W) -> Result<()> {
        if noise.values.len() != self.values.len() {
            return Err(Error::Shape("noise and solution paths differ in length".into()));
        }
        let mut out = std::io::BufWriter::new(out);
        let io = |e| Error::io("<path csv>", e);
        writeln!(out, "t,G,X").map_err(io)?;
        for ((t, g), x) in self.grid.times().zip(&noise.values).zip(&self.values) {
            writeln!(out, "{t},{g},{x}").map_err(io)?;
        }
        out.flush().map_err(io)
    }
}

/// Reads an observed path from a CSV with columns `t` and `X` (other
/// columns, such as the `G` written by [`VasicekPath::write_csv`], are
/// ignored). Times must start at zero and be uniformly spaced.
pub fn read_path_csv(path: &Path) -> Result<(Grid, Vec<f64>)> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Input(format!("{}: missing column {name:?}", path.display())))
    };
    let (ti, xi) = (column("t")?, column("X")?);
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::csv(path, e))?;
        let field = |i: usize| -> Result<f64> {
            let raw = record.get(i).unwrap_or("").trim();
            raw.parse().map_err(|_| Error::Input(format!("{}: row {}: bad number {raw:?}", path.display(), line + 2)))
        };
        times.push(field(ti)?);
        values.push(field(xi)?);
    }
    if times.len() < 2 {
        return Err(Error::Input(format!("{}: need at least two observations", path.display())));
    }
    if times[0] != 0.0 {
        return Err(Error::Input(format!("{}: first time must be 0, got {}", path.display(), times[0])));
    }
    let dt = times[1];
    let grid = Grid::new(times.len() - 1, dt)?;
    for (i, &t) in times.iter().enumerate() {
        if (t - grid.time(i)).abs() > 1e-9 * t.abs().max(1.0) {
            return Err(Error::Input(format!("{}: time grid is not uniform at row {}", path.display(), i + 2)));
        }
    }
    Ok((grid, values))
}

pub fn simulate_vasicek(params: &VasicekParams, noise: &GaussianPath, scheme: Scheme) -> Result<VasicekPath> {
    simulate_vasicek_from(params, noise, scheme, 0.0)
}

/// As [`simulate_vasicek`], starting from `x0` instead of zero.
pub fn simulate_vasicek_from(params: &VasicekParams, noise: &GaussianPath, scheme: Scheme, x0: f64) -> Result<VasicekPath> {
    params.validate()?;
    let grid = noise.grid;
    if noise.values.len() != grid.steps() + 1 {
        return Err(Error::Shape("noise path length does not match its grid".into()));
    }
    let dt = grid.dt();
    let kdt = params.k * dt;
    if kdt >= MAX_STIFFNESS {
        return Err(Error::Stiff(kdt));
    }
    let VasicekParams { k, mu, sigma } = *params;
    let mut values = Vec::with_capacity(noise.values.len());
    values.push(x0);
    let mut x = x0;
    match scheme {
        Scheme::ExactRecursion => {
            let decay = (-kdt).exp();
            let weight = sigma * (-0.5 * kdt).exp();
            let drift = mu * (1.0 - decay);
            for dg in noise.increments() {
                x = decay * x + drift + weight * dg;
                values.push(x);
            }
        }
        Scheme::Euler => {
            for dg in noise.increments() {
                x += k * (mu - x) * dt + sigma * dg;
                values.push(x);
            }
        }
    }
    Ok(VasicekPath { grid, values, params: *params, scheme })
}

/// `F_T = ∫_0^T e^{-kt} ∫_0^t e^{ks} dG_s dt` computed directly, together
/// with `Z_T = ∫_0^T e^{-k(T-s)} dG_s`. By Fubini `F_T = (G_T - Z_T)/k`; the
/// residual measures how far the discrete path is from that identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FDecomposition {
    pub f_t: f64,
    pub z_t: f64,
    pub residual: f64,
}

pub fn decompose_f(noise: &GaussianPath, k: f64) -> Result<FDecomposition> {
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::Domain(format!("k must be positive, got {k}")));
    }
    let dt = noise.grid.dt();
    let decay = (-k * dt).exp();
    // y_j = Σ_{i<j} e^{-k(t_j - t_i)} ΔG_i, so that F_T ≈ Δ Σ_j y_j and
    // Z_T = y_n. The recursion avoids forming e^{k t_i}.
    let mut y = 0.0;
    let mut f_sum = 0.0;
    for dg in noise.increments() {
        f_sum += y;
        y = decay * (y + dg);
    }
    let f_t = dt * f_sum;
    // Left-point Z_T = Σ_i e^{-k(T - t_i)} ΔG_i = y_n.
    let z_t = y;
    let g_t = *noise.values.last().expect("non-empty path");
    let residual = (f_t - (g_t - z_t) / k).abs();
    Ok(FDecomposition { f_t, z_t, residual })
}
