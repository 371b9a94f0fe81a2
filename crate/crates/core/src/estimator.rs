//! Mean estimators over a shuffled batch.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Resample count used when the configuration does not name one.
pub const DEFAULT_BOOTSTRAP_B: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    #[default]
    Sample,
    Mle,
    Bootstrap,
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EstimatorKind::Sample => "sample",
            EstimatorKind::Mle => "mle",
            EstimatorKind::Bootstrap => "bootstrap",
        })
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sample" => Ok(EstimatorKind::Sample),
            "mle" => Ok(EstimatorKind::Mle),
            "bootstrap" => Ok(EstimatorKind::Bootstrap),
            other => Err(Error::config("estimator", format!("unknown estimator {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub method: EstimatorKind,
    pub estimate: f64,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bootstrap_b: Option<usize>,
}

fn check(z: &[f64]) -> Result<()> {
    if z.is_empty() {
        return Err(Error::Empty("estimator input"));
    }
    if let Some(bad) = z.iter().find(|v| !v.is_finite()) {
        return Err(Error::Degenerate(format!("non-finite value {bad}")));
    }
    Ok(())
}

fn mean(z: &[f64]) -> f64 {
    z.iter().sum::<f64>() / z.len() as f64
}

/// Arithmetic mean of the batch.
pub fn sample_mean(z: &[f64]) -> Result<f64> {
    check(z)?;
    Ok(mean(z))
}

/// Laplace maximum-likelihood location: a minimizer of `Σ|z_i - μ|`, i.e.
/// the median. For even `n` the midpoint of the two central values.
pub fn mle_mean(z: &[f64]) -> Result<f64> {
    check(z)?;
    let mut sorted = z.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    Ok(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        sorted[n / 2 - 1] + (sorted[n / 2] - sorted[n / 2 - 1]) / 2.0
    })
}

/// Mean of `b` resample means, each resample drawn with replacement.
pub fn bootstrap_mean<R: Rng + ?Sized>(z: &[f64], b: usize, rng: &mut R) -> Result<f64> {
    check(z)?;
    if b == 0 {
        return Err(Error::config("bootstrap_b", "must be positive"));
    }
    let n = z.len();
    let resamples = (0..b).map(|_| (0..n).map(|_| rng.gen_range(0..n)).collect::<Vec<_>>());
    average_of_resamples(z, resamples)
}

/// Bootstrap estimate over caller-chosen resamples, given as indices into
/// `z`. Each resample must have length `n`.
pub fn bootstrap_mean_from_indices<I>(z: &[f64], resamples: I) -> Result<f64>
where
    I: IntoIterator<Item = Vec<usize>>,
{
    check(z)?;
    average_of_resamples(z, resamples)
}

fn average_of_resamples<I>(z: &[f64], resamples: I) -> Result<f64>
where
    I: IntoIterator<Item = Vec<usize>>,
{
    let n = z.len();
    let mut sum = 0.0;
    let mut b = 0usize;
    for idx in resamples {
        if idx.len() != n {
            return Err(Error::SizeMismatch {
                expected: n,
                found: idx.len(),
            });
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
            return Err(Error::Degenerate(format!("resample index {bad} out of bounds")));
        }
        sum += idx.iter().map(|&i| z[i]).sum::<f64>() / n as f64;
        b += 1;
    }
    if b == 0 {
        return Err(Error::config("bootstrap_b", "must be positive"));
    }
    Ok(sum / b as f64)
}

/// Runs the chosen estimator. `bootstrap_b` is only read for
/// [`EstimatorKind::Bootstrap`].
pub fn estimate<R: Rng + ?Sized>(kind: EstimatorKind, z: &[f64], bootstrap_b: usize, rng: &mut R) -> Result<EstimateReport> {
    let (estimate, b) = match kind {
        EstimatorKind::Sample => (sample_mean(z)?, None),
        EstimatorKind::Mle => (mle_mean(z)?, None),
        EstimatorKind::Bootstrap => (bootstrap_mean(z, bootstrap_b, rng)?, Some(bootstrap_b)),
    };
    Ok(EstimateReport {
        method: kind,
        estimate,
        n: z.len(),
        bootstrap_b: b,
    })
}
