use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::IntegralMode;
use crate::kernels::{CovarianceKernel, Grid, Kernel, KernelSpec};
use crate::sampler::SamplerMethod;
use crate::vasicek::{Scheme, VasicekParams};

/// A Monte Carlo study, as read from the JSON config file.
///
/// ```json
/// {
///   "kernel": {"name": "fbm", "H": 0.7},
///   "params": {"k": 1.0, "mu": 2.0, "sigma": 1.0},
///   "T_list": [100, 400],
///   "dt": 0.05,
///   "replications": 200,
///   "master_seed": 42,
///   "modes": ["pathwise", "skorohod_oracle", "skorohod_plugin"],
///   "sampler": "circulant"
/// }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kernel: KernelSpec,
    pub params: VasicekParams,
    #[serde(rename = "T_list")]
    pub horizons: Vec<f64>,
    pub dt: f64,
    pub replications: usize,
    pub master_seed: u64,
    #[serde(default = "default_modes")]
    pub modes: Vec<IntegralMode>,
    #[serde(default = "default_sampler")]
    pub sampler: SamplerMethod,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    /// Initial value; the estimator theory assumes zero.
    #[serde(default)]
    pub x0: f64,
}

fn default_modes() -> Vec<IntegralMode> {
    IntegralMode::ALL.to_vec()
}

fn default_sampler() -> SamplerMethod {
    SamplerMethod::Circulant
}

fn default_scheme() -> Scheme {
    Scheme::ExactRecursion
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn kernel(&self) -> Result<Kernel> {
        Kernel::from_spec(&self.kernel)
    }

    pub fn grid(&self, horizon_index: usize) -> Result<Grid> {
        Grid::from_horizon(self.horizons[horizon_index], self.dt)
    }

    pub fn validate(&self) -> Result<()> {
        let kernel = self.kernel()?;
        self.params.validate()?;
        if self.replications < 2 {
            return Err(Error::Domain(format!("need at least 2 replications, got {}", self.replications)));
        }
        if self.horizons.is_empty() {
            return Err(Error::Domain("T_list is empty".into()));
        }
        for i in 0..self.horizons.len() {
            self.grid(i)?;
        }
        if self.modes.is_empty() {
            return Err(Error::Domain("no integral modes requested".into()));
        }
        let mut modes = self.modes.clone();
        modes.sort();
        modes.dedup();
        if modes.len() != self.modes.len() {
            return Err(Error::Domain("duplicate integral modes".into()));
        }
        if !self.x0.is_finite() {
            return Err(Error::Domain("x0 must be finite".into()));
        }
        if self.sampler == SamplerMethod::Circulant && kernel.fbm_hurst().is_none() {
            return Err(Error::Domain(format!(
                "the circulant sampler only supports fbm, not {}",
                self.kernel.name_str()
            )));
        }
        Ok(())
    }
}

impl KernelSpec {
    pub fn name_str(&self) -> &'static str {
        match self.name {
            crate::kernels::KernelName::Fbm => "fbm",
            crate::kernels::KernelName::Subfbm => "subfbm",
        }
    }
}
