//! Simulation and drift estimation for the Vasicek model
//!
//! ```text
//! dX_t = k (μ - X_t) dt + σ dG_t,     X_0 = 0,
//! ```
//!
//! driven by a centred Gaussian process `G` whose covariance behaves like
//! fractional Brownian motion with index `β = H ∈ (1/2, 1)` up to a
//! perturbation.
//!
//! The crate is layered bottom-up:
//!
//! * [`kernels`]: covariance kernels (fBm, sub-fBm) and an audit of the
//!   structural assumption on their mixed derivative.
//! * [`sampler`]: exact Gaussian path sampling by Cholesky factorisation or
//!   circulant embedding.
//! * [`vasicek`]: exact and Euler discretisations of the SDE.
//! * [`estimators`]: the ergodic moment estimator, least squares under three
//!   readings of `∫X dX`, and the limiting constants of their CLTs.
//! * [`mc`]: a deterministic parallel Monte Carlo harness with KS checks and
//!   CSV/JSON reports.
//!
//! ```
//! use gvasicek::{estimators, sampler, Grid, Kernel, Scheme, VasicekParams};
//!
//! let kernel = Kernel::fbm(0.7)?;
//! let grid = Grid::from_horizon(50.0, 0.05)?;
//! let noise = sampler::sample_path_cholesky(&kernel, &grid, 7)?;
//! let params = VasicekParams::new(1.0, 2.0, 1.0)?;
//! let path = gvasicek::simulate_vasicek(&params, &noise, Scheme::ExactRecursion)?;
//! let mu = estimators::mu_hat(&path);
//! assert!((mu - 2.0).abs() < 1.0);
//! # Ok::<(), gvasicek::Error>(())
//! ```

pub mod error;
pub mod estimators;
pub mod kernels;
pub mod mc;
pub mod quad;
pub mod sampler;
pub mod special;
pub mod vasicek;

pub use error::{Error, Result};
pub use estimators::{estimate, EstimateSet, IntegralMode};
pub use kernels::{check_assumption, CovarianceKernel, Fbm, Grid, Kernel, KernelSpec, SubFbm};
pub use sampler::{GaussianPath, SamplerMethod};
pub use vasicek::{simulate_vasicek, Scheme, VasicekParams, VasicekPath};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/kernels.md")]
    pub mod kernels {}
    #[doc = include_str!("../../../book/src/sampling.md")]
    pub mod sampling {}
    #[doc = include_str!("../../../book/src/vasicek.md")]
    pub mod vasicek {}
    #[doc = include_str!("../../../book/src/estimators.md")]
    pub mod estimators {}
    #[doc = include_str!("../../../book/src/monte-carlo.md")]
    pub mod monte_carlo {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
