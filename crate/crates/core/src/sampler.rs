//! Exact Gaussian path samplers.
//!
//! Two routes produce `G` on a uniform grid:
//!
//! * [`CholeskySampler`] factors the increment covariance matrix of any
//!   kernel and is `O(n³)` to set up, `O(n²)` per draw.
//! * [`CirculantSampler`] embeds the fractional Gaussian noise
//!   autocovariance in a circulant matrix (Davies–Harte) and draws two
//!   independent paths per FFT of length `2n`. It only applies to fBm.
//!
//! Both work on increments and cumulate them, so `G_0 = 0` exactly.

use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{increment_covariance_matrix, CovarianceKernel, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerMethod {
    Cholesky,
    Circulant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPath {
    pub grid: Grid,
    /// `values[i]` is `G` at `t_i`; `values[0] == 0`.
    pub values: Vec<f64>,
    pub seed: u64,
    pub method: SamplerMethod,
}

impl GaussianPath {
    pub fn increments(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.windows(2).map(|w| w[1] - w[0])
    }

    /// Every `factor`-th point, i.e. the same path seen on a coarser grid.
    pub fn subsample(&self, factor: usize) -> Result<GaussianPath> {
        let n = self.grid.steps();
        if factor == 0 || !n.is_multiple_of(factor) {
            return Err(Error::Shape(format!("cannot coarsen {n} steps by {factor}")));
        }
        Ok(GaussianPath {
            grid: Grid::new(n / factor, self.grid.dt() * factor as f64)?,
            values: self.values.iter().step_by(factor).copied().collect(),
            seed: self.seed,
            method: self.method,
        })
    }

    /// Writes `t,G` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut out = std::io::BufWriter::new(out);
        writeln!(out, "t,G")?;
        for (t, g) in self.grid.times().zip(&self.values) {
            writeln!(out, "{t},{g}")?;
        }
        out.flush()
    }
}

fn cumulate(increments: impl Iterator<Item = f64>, n: usize) -> Vec<f64> {
    let mut values = Vec::with_capacity(n + 1);
    values.push(0.0);
    let mut acc = 0.0;
    for dg in increments.take(n) {
        acc += dg;
        values.push(acc);
    }
    values
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a master seed with a stream position (e.g. horizon index and
/// replication index) into an independent path seed.
pub fn derive_seed(master: u64, stream: &[u64]) -> u64 {
    stream.iter().fold(splitmix64(master), |acc, &s| splitmix64(acc ^ splitmix64(s)))
}

pub(crate) fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Factored increment covariance for repeated draws on a fixed grid.
#[derive(Debug, Clone)]
pub struct CholeskySampler {
    grid: Grid,
    lower: DMatrix<f64>,
    jitter: f64,
}

impl CholeskySampler {
    /// Factors the increment covariance, adding `ε·I` with
    /// `ε ∈ {1e-12, 1e-10, 1e-8}·trace/n` if the plain factorization fails.
    pub fn new<K: CovarianceKernel + ?Sized>(kernel: &K, grid: &Grid) -> Result<Self> {
        let cov = increment_covariance_matrix(kernel, grid)?;
        let n = grid.steps();
        let scale = cov.trace() / n as f64;
        let mut last = 0.0;
        for rel in [0.0, 1e-12, 1e-10, 1e-8] {
            let jitter = rel * scale;
            last = jitter;
            let mut m = cov.clone();
            for i in 0..n {
                m[(i, i)] += jitter;
            }
            if let Some(ch) = m.cholesky() {
                return Ok(CholeskySampler { grid: *grid, lower: ch.unpack(), jitter });
            }
        }
        Err(Error::Decomposition { jitter: last })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Diagonal jitter that was needed, zero when the matrix factored as is.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn sample(&self, seed: u64) -> GaussianPath {
        let n = self.grid.steps();
        let mut rng = rng_from_seed(seed);
        let z = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let dg = &self.lower * z;
        GaussianPath {
            grid: self.grid,
            values: cumulate(dg.iter().copied(), n),
            seed,
            method: SamplerMethod::Cholesky,
        }
    }
}

/// One exact draw for an arbitrary kernel.
pub fn sample_path_cholesky<K: CovarianceKernel + ?Sized>(kernel: &K, grid: &Grid, seed: u64) -> Result<GaussianPath> {
    Ok(CholeskySampler::new(kernel, grid)?.sample(seed))
}

/// Autocovariance of fractional Gaussian noise with step `dt` at lag `j`.
pub fn fgn_autocovariance(hurst: f64, dt: f64, lag: usize) -> f64 {
    let h2 = 2.0 * hurst;
    let j = lag as f64;
    0.5 * dt.powf(h2) * ((j + 1.0).powf(h2) - 2.0 * j.powf(h2) + (j - 1.0).abs().powf(h2))
}

/// Circulant-embedding sampler for fBm increments.
#[derive(Clone)]
pub struct CirculantSampler {
    grid: Grid,
    /// `sqrt(λ_j / 2n)` for the circulant eigenvalues `λ_j`.
    amplitudes: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for CirculantSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CirculantSampler")
            .field("grid", &self.grid)
            .field("len", &self.amplitudes.len())
            .finish()
    }
}

impl CirculantSampler {
    pub fn new(hurst: f64, n: usize, dt: f64) -> Result<Self> {
        if !(hurst > 0.5 && hurst < 1.0) {
            return Err(Error::Domain(format!("circulant sampler needs H in (1/2, 1), got {hurst}")));
        }
        let grid = Grid::new(n, dt)?;
        let m = 2 * n;
        let mut row: Vec<Complex<f64>> = (0..m)
            .map(|j| {
                let lag = if j <= n { j } else { m - j };
                Complex::new(fgn_autocovariance(hurst, dt, lag), 0.0)
            })
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(m);
        fft.process(&mut row);
        let max = row.iter().map(|c| c.re).fold(f64::MIN, f64::max);
        let min = row.iter().map(|c| c.re).fold(f64::MAX, f64::min);
        if min < -1e-10 * max {
            return Err(Error::Embedding { min, max });
        }
        let amplitudes = row.iter().map(|c| (c.re.max(0.0) / m as f64).sqrt()).collect();
        Ok(CirculantSampler { grid, amplitudes, fft })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Two independent paths from one FFT (real and imaginary parts).
    pub fn sample_pair(&self, seed: u64) -> (GaussianPath, GaussianPath) {
        let n = self.grid.steps();
        let mut rng = rng_from_seed(seed);
        let mut buf: Vec<Complex<f64>> = self
            .amplitudes
            .iter()
            .map(|&a| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex::new(a * re, a * im)
            })
            .collect();
        self.fft.process(&mut buf);
        let first = GaussianPath {
            grid: self.grid,
            values: cumulate(buf.iter().map(|c| c.re), n),
            seed,
            method: SamplerMethod::Circulant,
        };
        let second = GaussianPath {
            values: cumulate(buf.iter().map(|c| c.im), n),
            ..first.clone()
        };
        (first, second)
    }

    pub fn sample(&self, seed: u64) -> GaussianPath {
        self.sample_pair(seed).0
    }
}

/// One fBm path of `n` steps drawn by circulant embedding.
pub fn sample_fgn_circulant(hurst: f64, n: usize, dt: f64, seed: u64) -> Result<GaussianPath> {
    Ok(CirculantSampler::new(hurst, n, dt)?.sample(seed))
}

/// Unbiased sample covariance of `(G_{t_i}, G_{t_j})` across paths for each
/// requested index pair.
pub fn empirical_covariance(paths: &[GaussianPath], pairs: &[(usize, usize)]) -> Result<Vec<f64>> {
    if paths.len() < 2 {
        return Err(Error::Shape(format!("need at least two paths, got {}", paths.len())));
    }
    let grid = paths[0].grid;
    if paths.iter().any(|p| p.grid != grid || p.values.len() != grid.steps() + 1) {
        return Err(Error::Shape("paths do not share a common grid".into()));
    }
    let m = paths.len() as f64;
    pairs
        .iter()
        .map(|&(i, j)| {
            if i > grid.steps() || j > grid.steps() {
                return Err(Error::Shape(format!("index pair ({i}, {j}) outside grid of {} steps", grid.steps())));
            }
            let mean_i = paths.iter().map(|p| p.values[i]).sum::<f64>() / m;
            let mean_j = paths.iter().map(|p| p.values[j]).sum::<f64>() / m;
            let s: f64 = paths.iter().map(|p| (p.values[i] - mean_i) * (p.values[j] - mean_j)).sum();
            Ok(s / (m - 1.0))
        })
        .collect()
}
