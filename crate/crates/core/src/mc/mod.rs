//! Monte Carlo verification of consistency and asymptotic normality.
//!
//! [`run_experiment`] replicates simulate → estimate for every horizon,
//! [`summarize`] aggregates the scaled errors and tests them against the
//! candidate limit laws, and [`emit_report`] writes the tables.

mod config;
pub mod ks;
mod report;
mod runner;
mod summary;

use serde::{Deserialize, Serialize};

use crate::estimators::IntegralMode;

pub use config::ExperimentConfig;
pub use ks::{jarque_bera, ks_normality, ks_studentized, ks_two_sample, JarqueBera, KsResult};
pub use report::{emit_report, read_replications_csv, read_replications_json, ReportFormat};
pub use runner::{records_to_rows, run_experiment, ReplicationRecord, MAX_FAILURE_RATE};
pub use summary::{
    summarize, CandidateFit, CellSummary, ConsistencyCheck, SummaryContext, SummaryStats, P_THRESHOLD, VARIANCE_FACTOR,
};

/// One line of `replications.csv`: a replication seen through one integral
/// mode. Missing values mark estimators that failed on that path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRow {
    pub index: usize,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub seed: u64,
    pub mu_hat: Option<f64>,
    pub k_hat: Option<f64>,
    pub mu_ls: Option<f64>,
    pub k_ls: Option<f64>,
    pub mode: IntegralMode,
    pub e_mu: Option<f64>,
    pub e_k: Option<f64>,
    pub e_mu_ls: Option<f64>,
    pub e_k_ls: Option<f64>,
}

impl ReplicationRow {
    pub fn is_failed(&self) -> bool {
        [self.mu_hat, self.k_hat, self.mu_ls, self.k_ls].iter().any(Option::is_none)
    }
}
