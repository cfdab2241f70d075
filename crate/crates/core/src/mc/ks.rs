//! Goodness-of-fit statistics for the limit laws.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Smallest sample accepted by [`ks_normality`].
pub const MIN_KS_SAMPLES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    #[serde(rename = "D")]
    pub d: f64,
    pub p: f64,
}

/// Standard normal CDF via `erfc`, accurate to a few ulp in both tails.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Kolmogorov survival function `Q(x) = 2 Σ_{j>=1} (-1)^{j-1} e^{-2j²x²}`.
pub fn kolmogorov_survival(x: f64) -> f64 {
    if x < 0.2 {
        // The series has not started to converge; Q is 1 to double precision.
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * x * x).exp();
        sum += sign * term;
        if term < 1e-16 * sum.abs() {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn p_value(d: f64, effective_n: f64) -> f64 {
    let en = effective_n.sqrt();
    kolmogorov_survival((en + 0.12 + 0.11 / en) * d)
}

/// One-sample Kolmogorov–Smirnov test of `samples / sd` against N(0, 1).
pub fn ks_normality(samples: &[f64], sd: f64) -> Result<KsResult> {
    if !(sd.is_finite() && sd > 0.0) {
        return Err(Error::Domain(format!("reference standard deviation must be positive, got {sd}")));
    }
    if samples.len() < MIN_KS_SAMPLES {
        return Err(Error::Domain(format!("KS test needs at least {MIN_KS_SAMPLES} samples, got {}", samples.len())));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("KS test samples must be finite".into()));
    }
    let mut z: Vec<f64> = samples.iter().map(|x| x / sd).collect();
    z.sort_by(f64::total_cmp);
    let m = z.len() as f64;
    let d = z
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal_cdf(x);
            (f - i as f64 / m).max((i + 1) as f64 / m - f)
        })
        .fold(0.0, f64::max);
    Ok(KsResult { d, p: p_value(d, m) })
}

/// KS test after centring by the sample mean and scaling by the sample
/// standard deviation. Only the shape of the law is tested.
pub fn ks_studentized(samples: &[f64]) -> Result<KsResult> {
    let (mean, var) = mean_variance(samples);
    let centred: Vec<f64> = samples.iter().map(|x| x - mean).collect();
    ks_normality(&centred, var.sqrt())
}

/// Two-sample Kolmogorov–Smirnov test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Domain("two-sample KS needs non-empty samples".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(KsResult { d, p: p_value(d, na * nb / (na + nb)) })
}

/// Sample mean and unbiased variance.
pub fn mean_variance(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let ss: f64 = samples.iter().map(|x| (x - mean).powi(2)).sum();
    (mean, if samples.len() > 1 { ss / (n - 1.0) } else { 0.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JarqueBera {
    pub statistic: f64,
    pub p: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

/// Jarque–Bera statistic with its asymptotic χ²₂ p-value `exp(-JB/2)`.
pub fn jarque_bera(samples: &[f64]) -> Option<JarqueBera> {
    let n = samples.len() as f64;
    if samples.len() < 3 {
        return None;
    }
    let mean = samples.iter().sum::<f64>() / n;
    let m2 = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    if m2 <= 0.0 {
        return None;
    }
    let m3 = samples.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
    let m4 = samples.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    let skewness = m3 / m2.powf(1.5);
    let excess_kurtosis = m4 / (m2 * m2) - 3.0;
    let statistic = n / 6.0 * (skewness * skewness + 0.25 * excess_kurtosis * excess_kurtosis);
    Some(JarqueBera { statistic, p: (-0.5 * statistic).exp(), skewness, excess_kurtosis })
}
