use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{asymptotic_constants, AsymptoticConstants, IntegralMode};
use crate::kernels::CovarianceKernel;
use crate::mc::config::ExperimentConfig;
use crate::mc::ks::{jarque_bera, ks_normality, ks_studentized, mean_variance, JarqueBera, KsResult, MIN_KS_SAMPLES};
use crate::mc::ReplicationRow;
use crate::vasicek::VasicekParams;

/// A KS p-value above this counts as a fit.
pub const P_THRESHOLD: f64 = 0.01;

/// Empirical and candidate variances within this factor of each other count
/// as agreeing.
pub const VARIANCE_FACTOR: f64 = 1.5;

/// What the summary needs besides the rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryContext {
    pub params: VasicekParams,
    pub beta: f64,
    /// Absent when `β >= 3/4`, where the `k` limit laws are not Gaussian.
    pub constants: Option<AsymptoticConstants>,
}

impl SummaryContext {
    /// Context for an experiment: true parameters and, when `β < 3/4`, the
    /// limit constants for unit noise.
    pub fn for_config(config: &ExperimentConfig) -> Result<Self> {
        let kernel = config.kernel()?;
        let beta = kernel.beta();
        Ok(SummaryContext { params: config.params, beta, constants: asymptotic_constants(&kernel, config.params.k).ok() })
    }

    /// Candidate variances of the scaled error. The `k` errors do not depend
    /// on `σ`, the `μ` errors scale with it.
    fn candidates(&self, estimator: Estimator) -> Vec<(&'static str, f64)> {
        let var_mu = self.params.sigma.powi(2) / (self.params.k * self.params.k);
        match (estimator, &self.constants) {
            (Estimator::MuHat | Estimator::MuLs(_), _) => vec![("var_mu", var_mu)],
            (Estimator::KHat, Some(c)) => vec![
                ("var_k_moment_thm", c.var_k_moment_thm),
                ("var_k_moment_prop", c.var_k_moment_prop),
                ("var_k_moment_proof", c.var_k_moment_proof),
            ],
            (Estimator::KLs(_), Some(c)) => vec![("var_k_ls", c.var_k_ls)],
            (_, None) => vec![],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Estimator {
    MuHat,
    KHat,
    MuLs(IntegralMode),
    KLs(IntegralMode),
}

impl Estimator {
    fn label(&self) -> String {
        match self {
            Estimator::MuHat => "mu_hat".into(),
            Estimator::KHat => "k_hat".into(),
            Estimator::MuLs(m) => format!("mu_ls_{m}"),
            Estimator::KLs(m) => format!("k_ls_{m}"),
        }
    }

    fn mode(&self) -> Option<IntegralMode> {
        match self {
            Estimator::MuHat | Estimator::KHat => None,
            Estimator::MuLs(m) | Estimator::KLs(m) => Some(*m),
        }
    }

    /// (estimate, scaled error)
    fn pick(&self, row: &ReplicationRow) -> Option<(f64, f64)> {
        match self {
            Estimator::MuHat => row.mu_hat.zip(row.e_mu),
            Estimator::KHat => row.k_hat.zip(row.e_k),
            Estimator::MuLs(_) => row.mu_ls.zip(row.e_mu_ls),
            Estimator::KLs(_) => row.k_ls.zip(row.e_k_ls),
        }
    }

    fn truth(&self, params: &VasicekParams) -> f64 {
        match self {
            Estimator::MuHat | Estimator::MuLs(_) => params.mu,
            Estimator::KHat | Estimator::KLs(_) => params.k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateFit {
    pub name: String,
    pub variance: f64,
    /// Empirical variance over candidate variance.
    pub ratio: f64,
    pub within_factor: bool,
    pub ks: Option<KsResult>,
    pub passes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub estimator: String,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub valid: usize,
    pub failed: usize,
    /// Moments of the scaled errors.
    pub mean: f64,
    pub median: f64,
    pub variance: f64,
    /// Median of the unscaled absolute error `|estimate - truth|`.
    pub median_abs_error: f64,
    pub candidates: Vec<CandidateFit>,
    /// KS test after centring and scaling by the sample moments.
    pub studentized: Option<KsResult>,
    pub jarque_bera: Option<JarqueBera>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyCheck {
    pub estimator: String,
    #[serde(rename = "T")]
    pub horizons: Vec<f64>,
    pub median_abs_errors: Vec<f64>,
    /// Median absolute error strictly decreases along the horizons (or is
    /// already zero).
    pub decreasing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub context: SummaryContext,
    pub cells: Vec<CellSummary>,
    pub consistency: Vec<ConsistencyCheck>,
}

impl SummaryStats {
    pub fn cell(&self, estimator: &str, horizon: f64) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.estimator == estimator && c.horizon == horizon)
    }

    pub fn consistency(&self, estimator: &str) -> Option<&ConsistencyCheck> {
        self.consistency.iter().find(|c| c.estimator == estimator)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

fn summarize_cell(
    estimator: Estimator,
    horizon: f64,
    rows: &[&ReplicationRow],
    ctx: &SummaryContext,
) -> Result<CellSummary> {
    let picked: Vec<(f64, f64)> = rows.iter().filter_map(|r| estimator.pick(r)).collect();
    let failed = rows.len() - picked.len();
    let label = estimator.label();
    if picked.is_empty() {
        return Err(Error::Summary(format!("every replication failed for {label} at T = {horizon}")));
    }
    let errors: Vec<f64> = picked.iter().map(|p| p.1).collect();
    let truth = estimator.truth(&ctx.params);
    let abs_errors = sorted(picked.iter().map(|p| (p.0 - truth).abs()).collect());
    let (mean, variance) = mean_variance(&errors);
    let enough = errors.len() >= MIN_KS_SAMPLES;
    let candidates = ctx
        .candidates(estimator)
        .into_iter()
        .map(|(name, v)| {
            let ratio = variance / v;
            let ks = if enough { ks_normality(&errors, v.sqrt()).ok() } else { None };
            CandidateFit {
                name: name.to_string(),
                variance: v,
                ratio,
                within_factor: (1.0 / VARIANCE_FACTOR..=VARIANCE_FACTOR).contains(&ratio),
                passes: ks.is_some_and(|k| k.p > P_THRESHOLD),
                ks,
            }
        })
        .collect();
    let studentized = if enough && variance > 0.0 { ks_studentized(&errors).ok() } else { None };
    Ok(CellSummary {
        estimator: label,
        horizon,
        valid: errors.len(),
        failed,
        mean,
        median: median(&sorted(errors.clone())),
        variance,
        median_abs_error: median(&abs_errors),
        candidates,
        studentized,
        jarque_bera: jarque_bera(&errors),
    })
}

/// Aggregates replication rows per estimator and horizon.
///
/// `mu_hat` and `k_hat` do not depend on the integral mode and are read
/// once per replication; the LS estimators get one cell per mode.
pub fn summarize(rows: &[ReplicationRow], ctx: &SummaryContext) -> Result<SummaryStats> {
    if rows.is_empty() {
        return Err(Error::Summary("no replication rows".into()));
    }
    let mut horizons: Vec<f64> = rows.iter().map(|r| r.horizon).collect();
    horizons.sort_by(f64::total_cmp);
    horizons.dedup();
    let mut modes: Vec<IntegralMode> = rows.iter().map(|r| r.mode).collect();
    modes.sort();
    modes.dedup();
    let mut estimators = vec![Estimator::MuHat, Estimator::KHat];
    estimators.extend(modes.iter().map(|&m| Estimator::MuLs(m)));
    estimators.extend(modes.iter().map(|&m| Estimator::KLs(m)));

    let mut cells = Vec::new();
    for &horizon in &horizons {
        for est in &estimators {
            let selected: Vec<&ReplicationRow> = match est.mode() {
                Some(m) => rows.iter().filter(|r| r.horizon == horizon && r.mode == m).collect(),
                None => {
                    // one row per replication: take the first mode
                    rows.iter().filter(|r| r.horizon == horizon && r.mode == modes[0]).collect()
                }
            };
            if selected.is_empty() {
                continue;
            }
            cells.push(summarize_cell(*est, horizon, &selected, ctx)?);
        }
    }

    let consistency = estimators
        .iter()
        .map(|est| {
            let label = est.label();
            let series: Vec<(f64, f64)> = cells
                .iter()
                .filter(|c| c.estimator == label)
                .map(|c| (c.horizon, c.median_abs_error))
                .collect();
            let decreasing = series.windows(2).all(|w| w[1].1 < w[0].1 || w[1].1 == 0.0);
            ConsistencyCheck {
                estimator: label,
                horizons: series.iter().map(|s| s.0).collect(),
                median_abs_errors: series.iter().map(|s| s.1).collect(),
                decreasing,
            }
        })
        .collect();

    Ok(SummaryStats { context: ctx.clone(), cells, consistency })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::Fbm;
    use crate::mc::ks::normal_quantile;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn ctx() -> SummaryContext {
        let kern = Fbm::new(0.7).unwrap();
        SummaryContext {
            params: VasicekParams::new(2.0, 1.0, 1.0).unwrap(),
            beta: 0.7,
            constants: Some(asymptotic_constants(&kern, 2.0).unwrap()),
        }
    }

    fn row(index: usize, horizon: f64, mode: IntegralMode, e_mu: f64, e_k: f64) -> ReplicationRow {
        let rm = horizon.powf(0.3);
        let rk = horizon.sqrt();
        ReplicationRow {
            index,
            horizon,
            seed: index as u64,
            mu_hat: Some(1.0 + e_mu / rm),
            k_hat: Some(2.0 + e_k / rk),
            mu_ls: Some(1.0 + e_mu / rm),
            k_ls: Some(2.0 + e_k / rk),
            mode,
            e_mu: Some(e_mu),
            e_k: Some(e_k),
            e_mu_ls: Some(e_mu),
            e_k_ls: Some(e_k),
        }
    }

    #[test]
    fn exact_estimates_give_zero_moments() {
        let rows: Vec<_> = (0..30)
            .flat_map(|i| [row(i, 10.0, IntegralMode::Pathwise, 0.0, 0.0), row(i, 40.0, IntegralMode::Pathwise, 0.0, 0.0)])
            .collect();
        let s = summarize(&rows, &ctx()).unwrap();
        let c = s.cell("mu_hat", 40.0).unwrap();
        assert_eq!((c.mean, c.variance, c.median_abs_error), (0.0, 0.0, 0.0));
        assert!(s.consistency("mu_hat").unwrap().decreasing);
    }

    #[test]
    fn synthetic_mu_errors_fit_their_law() {
        let c = ctx();
        let sd = c.constants.unwrap().var_mu.sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let rows: Vec<_> = (0..400)
            .map(|i| {
                let e: f64 = rng.sample::<f64, _>(StandardNormal) * sd;
                row(i, 50.0, IntegralMode::SkorohodOracle, e, 0.0)
            })
            .collect();
        let s = summarize(&rows, &c).unwrap();
        let cell = s.cell("mu_hat", 50.0).unwrap();
        assert_eq!(cell.candidates.len(), 1);
        assert!(cell.candidates[0].passes, "{cell:?}");
        assert!(cell.candidates[0].within_factor);
    }

    #[test]
    fn k_errors_adjudicate_between_candidates() {
        let c = ctx();
        let k = c.constants.unwrap();
        let m = 500;
        let rows: Vec<_> = (0..m)
            .map(|i| {
                let z = normal_quantile((i as f64 + 0.5) / m as f64);
                row(i, 50.0, IntegralMode::Pathwise, 0.0, z * k.var_k_moment_thm.sqrt())
            })
            .collect();
        let s = summarize(&rows, &c).unwrap();
        let cell = s.cell("k_hat", 50.0).unwrap();
        let fit = |n: &str| cell.candidates.iter().find(|f| f.name == n).unwrap();
        assert!(fit("var_k_moment_thm").passes);
        assert!(fit("var_k_moment_thm").within_factor);
        // at k = 2 the other two candidates are far from the theorem value
        assert!(!fit("var_k_moment_prop").within_factor);
        assert!(!fit("var_k_moment_prop").passes);
    }

    #[test]
    fn all_failed_cell_is_an_error() {
        let mut r = row(0, 10.0, IntegralMode::Pathwise, 0.0, 0.0);
        r.k_hat = None;
        r.e_k = None;
        assert!(matches!(summarize(&[r], &ctx()), Err(Error::Summary(_))));
        assert!(summarize(&[], &ctx()).is_err());
    }

    #[test]
    fn small_cells_skip_ks() {
        let rows: Vec<_> = (0..5).map(|i| row(i, 10.0, IntegralMode::Pathwise, i as f64, 0.0)).collect();
        let s = summarize(&rows, &ctx()).unwrap();
        let cell = s.cell("mu_hat", 10.0).unwrap();
        assert!(cell.candidates[0].ks.is_none());
        assert!(!cell.candidates[0].passes);
        assert!(cell.studentized.is_none());
    }
}
