use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{
    k_from_variance, k_rate, ls_with_correction, mu_rate, skorohod_correction, IntegralMode, LsEstimates,
    PathIntegrals,
};
use crate::kernels::{CovarianceKernel, Kernel};
use crate::mc::config::ExperimentConfig;
use crate::mc::ReplicationRow;
use crate::sampler::{derive_seed, CholeskySampler, CirculantSampler, GaussianPath, SamplerMethod};
use crate::vasicek::simulate_vasicek_from;

/// Largest tolerated share of rows with a failed estimator.
pub const MAX_FAILURE_RATE: f64 = 0.2;

/// Everything computed from one simulated path.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationRecord {
    pub index: usize,
    pub horizon_index: usize,
    pub horizon: f64,
    /// Seed of the noise draw. Circulant draws come in pairs, so indices
    /// `2m` and `2m+1` share a seed (real and imaginary parts).
    pub seed: u64,
    pub mu_hat: f64,
    pub k_hat: std::result::Result<f64, String>,
    pub ls: Vec<(IntegralMode, std::result::Result<LsEstimates, String>)>,
}

impl ReplicationRecord {
    /// One flat row per mode.
    pub fn rows(&self, config: &ExperimentConfig, beta: f64) -> Vec<ReplicationRow> {
        let truth = config.params;
        let rm = mu_rate(self.horizon, beta);
        let rk = k_rate(self.horizon);
        let finite = |v: f64| v.is_finite().then_some(v);
        let mu_hat = finite(self.mu_hat);
        let k_hat = self.k_hat.as_ref().ok().copied().and_then(finite);
        self.ls
            .iter()
            .map(|(mode, ls)| {
                let ls = ls.as_ref().ok();
                let mu_ls = ls.map(|l| l.mu_ls).and_then(finite);
                let k_ls = ls.map(|l| l.k_ls).and_then(finite);
                ReplicationRow {
                    index: self.index,
                    horizon: self.horizon,
                    seed: self.seed,
                    mu_hat,
                    k_hat,
                    mu_ls,
                    k_ls,
                    mode: *mode,
                    e_mu: mu_hat.map(|v| rm * (v - truth.mu)),
                    e_k: k_hat.map(|v| rk * (v - truth.k)),
                    e_mu_ls: mu_ls.map(|v| rm * (v - truth.mu)),
                    e_k_ls: k_ls.map(|v| rk * (v - truth.k)),
                }
            })
            .collect()
    }
}

enum PathSource {
    Circulant(CirculantSampler),
    Cholesky(CholeskySampler),
}

fn estimate_path(
    config: &ExperimentConfig,
    kernel: &Kernel,
    oracle_correction: f64,
    noise: &GaussianPath,
    index: usize,
    horizon_index: usize,
) -> Result<ReplicationRecord> {
    let params = config.params;
    let path = simulate_vasicek_from(&params, noise, config.scheme, config.x0)?;
    let ints = PathIntegrals::of(&path);
    let k_hat = k_from_variance(ints.sample_variance(), params.sigma, kernel);
    let sigma2 = params.sigma * params.sigma;
    let ls = config
        .modes
        .iter()
        .map(|&mode| {
            let correction = match mode {
                IntegralMode::Pathwise => Ok(0.0),
                IntegralMode::SkorohodOracle => Ok(oracle_correction),
                IntegralMode::SkorohodPlugin => match &k_hat {
                    Ok(k) => skorohod_correction(kernel, *k, ints.horizon)
                        .map(|c| sigma2 * c)
                        .map_err(|e| e.to_string()),
                    Err(e) => Err(e.to_string()),
                },
            };
            let ls = correction.and_then(|c| ls_with_correction(&ints, c).map_err(|e| e.to_string()));
            (mode, ls)
        })
        .collect();
    Ok(ReplicationRecord {
        index,
        horizon_index,
        horizon: ints.horizon,
        seed: noise.seed,
        mu_hat: ints.mean_x(),
        k_hat: k_hat.map_err(|e| e.to_string()),
        ls,
    })
}

/// Runs every replication for every horizon on the current rayon pool.
///
/// Records are ordered by horizon, then replication index, and depend only
/// on the config: the seed of replication `i` at horizon `j` is derived from
/// `(master_seed, j, i)` (or `i / 2` for paired circulant draws), never from
/// scheduling.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ReplicationRecord>> {
    config.validate()?;
    let kernel = config.kernel()?;
    let mut records = Vec::with_capacity(config.horizons.len() * config.replications);
    for (j, &horizon) in config.horizons.iter().enumerate() {
        let grid = config.grid(j)?;
        let oracle = config.params.sigma.powi(2) * skorohod_correction(&kernel, config.params.k, horizon)?;
        let source = match config.sampler {
            SamplerMethod::Circulant => {
                let hurst = kernel
                    .fbm_hurst()
                    .ok_or_else(|| Error::Domain("circulant sampler requires an fbm kernel".into()))?;
                PathSource::Circulant(CirculantSampler::new(hurst, grid.steps(), grid.dt())?)
            }
            SamplerMethod::Cholesky => PathSource::Cholesky(CholeskySampler::new(&kernel, &grid)?),
        };
        let m = config.replications;
        let batch: Vec<Result<Vec<ReplicationRecord>>> = match &source {
            PathSource::Circulant(s) => (0..m.div_ceil(2))
                .into_par_iter()
                .map(|pair| {
                    let seed = derive_seed(config.master_seed, &[j as u64, pair as u64]);
                    let (a, b) = s.sample_pair(seed);
                    let mut out = vec![estimate_path(config, &kernel, oracle, &a, 2 * pair, j)?];
                    if 2 * pair + 1 < m {
                        out.push(estimate_path(config, &kernel, oracle, &b, 2 * pair + 1, j)?);
                    }
                    Ok(out)
                })
                .collect(),
            PathSource::Cholesky(s) => (0..m)
                .into_par_iter()
                .map(|i| {
                    let seed = derive_seed(config.master_seed, &[j as u64, i as u64]);
                    Ok(vec![estimate_path(config, &kernel, oracle, &s.sample(seed), i, j)?])
                })
                .collect(),
        };
        for chunk in batch {
            records.extend(chunk?);
        }
    }
    let rows: Vec<ReplicationRow> = records.iter().flat_map(|r| r.rows(config, kernel.beta())).collect();
    check_failure_rate(&rows)?;
    Ok(records)
}

/// Failed estimators are kept in their rows, but an experiment where more
/// than [`MAX_FAILURE_RATE`] of the rows failed is not worth summarizing.
pub(crate) fn check_failure_rate(rows: &[ReplicationRow]) -> Result<()> {
    let failed = rows.iter().filter(|r| r.is_failed()).count();
    if failed as f64 > MAX_FAILURE_RATE * rows.len() as f64 {
        return Err(Error::Experiment(format!("{failed} of {} rows have failed estimators", rows.len())));
    }
    Ok(())
}

/// Flattened rows of all records, in record order.
pub fn records_to_rows(records: &[ReplicationRecord], config: &ExperimentConfig) -> Result<Vec<ReplicationRow>> {
    let beta = config.kernel()?.beta();
    Ok(records.iter().flat_map(|r| r.rows(config, beta)).collect())
}
