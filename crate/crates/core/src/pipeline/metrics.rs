use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Utility and attack metrics for one run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EvaluationMetrics {
    /// Signed average error `mean(x - z)`.
    pub aae: f64,
    /// Largest squared gap `max (x - z)^2`.
    pub mse: f64,
    pub precision: f64,
    pub recall: f64,
}

fn paired(x: &[f64], z: &[f64]) -> Result<()> {
    if x.len() != z.len() {
        return Err(Error::SizeMismatch {
            expected: x.len(),
            found: z.len(),
        });
    }
    if x.is_empty() {
        return Err(Error::Empty("metric input"));
    }
    Ok(())
}

/// Average aggregation error, pairing `x` and `z` by position.
pub fn aae(x: &[f64], z: &[f64]) -> Result<f64> {
    paired(x, z)?;
    Ok(x.iter().zip(z).map(|(a, b)| a - b).sum::<f64>() / x.len() as f64)
}

/// Maximum squared error, pairing `x` and `z` by position.
pub fn mse(x: &[f64], z: &[f64]) -> Result<f64> {
    paired(x, z)?;
    Ok(x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).fold(0.0, f64::max))
}
