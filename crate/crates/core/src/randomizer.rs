//! Budget-aware Laplace randomizer.
//!
//! Each contributor perturbs its reading with `Lap(0, Δ/ε_s)` noise. If the
//! budget is too small to meet the interval precision `(β, ρ)`, the noisy
//! value is clamped back into `[x_min, x_max]`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Declared range of every reading. `delta()` doubles as the sensitivity
/// between any two inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRange")]
pub struct DataRange {
    x_min: f64,
    x_max: f64,
}

#[derive(Deserialize)]
struct RawRange {
    x_min: f64,
    x_max: f64,
}

impl TryFrom<RawRange> for DataRange {
    type Error = Error;
    fn try_from(r: RawRange) -> Result<Self> {
        DataRange::new(r.x_min, r.x_max)
    }
}

impl DataRange {
    pub fn new(x_min: f64, x_max: f64) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) {
            return Err(Error::config("range", "bounds must be finite"));
        }
        if x_min >= x_max {
            return Err(Error::config(
                "range",
                format!("x_min ({x_min}) must be below x_max ({x_max})"),
            ));
        }
        Ok(DataRange { x_min, x_max })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn delta(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn contains(&self, x: f64) -> bool {
        (self.x_min..=self.x_max).contains(&x)
    }

    pub fn clamp(&self, y: f64) -> f64 {
        y.clamp(self.x_min, self.x_max)
    }
}

/// Interval precision: the noisy output should land in `[(1-β)x, (1+β)x]`
/// with probability at least `ρ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPrecision")]
pub struct PrecisionRequirement {
    beta: f64,
    rho: f64,
}

#[derive(Deserialize)]
struct RawPrecision {
    beta: f64,
    rho: f64,
}

impl TryFrom<RawPrecision> for PrecisionRequirement {
    type Error = Error;
    fn try_from(r: RawPrecision) -> Result<Self> {
        PrecisionRequirement::new(r.beta, r.rho)
    }
}

impl PrecisionRequirement {
    pub fn new(beta: f64, rho: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::config("precision.beta", format!("{beta} not in [0, 1]")));
        }
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::config("precision.rho", format!("{rho} not in [0, 1)")));
        }
        Ok(PrecisionRequirement { beta, rho })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }
}

/// Local budget `ε_s` for the randomizer and `α` for the shuffler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBudget")]
pub struct PrivacyBudget {
    epsilon_s: f64,
    alpha: f64,
}

#[derive(Deserialize)]
struct RawBudget {
    epsilon_s: f64,
    alpha: f64,
}

impl TryFrom<RawBudget> for PrivacyBudget {
    type Error = Error;
    fn try_from(r: RawBudget) -> Result<Self> {
        PrivacyBudget::new(r.epsilon_s, r.alpha)
    }
}

impl PrivacyBudget {
    pub fn new(epsilon_s: f64, alpha: f64) -> Result<Self> {
        if !(epsilon_s.is_finite() && epsilon_s > 0.0) {
            return Err(Error::config("budget.epsilon_s", format!("{epsilon_s} must be positive")));
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::config("budget.alpha", format!("{alpha} must be positive")));
        }
        Ok(PrivacyBudget { epsilon_s, alpha })
    }

    pub fn epsilon_s(&self) -> f64 {
        self.epsilon_s
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn with_epsilon_s(self, epsilon_s: f64) -> Result<Self> {
        PrivacyBudget::new(epsilon_s, self.alpha)
    }

    pub fn with_alpha(self, alpha: f64) -> Result<Self> {
        PrivacyBudget::new(self.epsilon_s, alpha)
    }
}

/// Smallest `ε_s` meeting `(β, ρ)`: `-Δ·ln(1-ρ) / (β·x_max)`.
///
/// Undefined for `β = 0` or `x_max <= 0`.
pub fn min_budget(range: &DataRange, precision: &PrecisionRequirement) -> Result<f64> {
    if precision.beta <= 0.0 {
        return Err(Error::config("precision.beta", "must be positive to bound the budget"));
    }
    if range.x_max <= 0.0 {
        return Err(Error::config("range.x_max", "must be positive to bound the budget"));
    }
    // -ln(1-ρ) via ln_1p keeps ρ = 0 exactly at zero
    Ok(-range.delta() * (-precision.rho).ln_1p() / (precision.beta * range.x_max))
}

/// One draw from `Lap(0, scale)` by inverting the CDF at a single uniform
/// variate.
pub fn sample_laplace<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> Result<f64> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::config("scale", format!("{scale} must be positive")));
    }
    Ok(laplace_from_uniform(scale, rng))
}

fn laplace_from_uniform<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> f64 {
    loop {
        // u in [-1/2, 1/2); the endpoint -1/2 maps to an infinite draw
        let u: f64 = rng.gen::<f64>() - 0.5;
        if u == -0.5 {
            continue;
        }
        return -scale * u.signum() * (-2.0 * u.abs()).ln_1p();
    }
}

/// Whether the clamp step is engaged for this budget.
pub fn clamps(budget: &PrivacyBudget, range: &DataRange, precision: &PrecisionRequirement) -> Result<bool> {
    Ok(budget.epsilon_s < min_budget(range, precision)?)
}

/// Perturbs one reading. Inputs outside `range` are rejected.
pub fn randomize<R: Rng + ?Sized>(
    x: f64,
    budget: &PrivacyBudget,
    range: &DataRange,
    precision: &PrecisionRequirement,
    rng: &mut R,
) -> Result<f64> {
    BudgetAwareRandomizer::new(*budget, *range, *precision)?.randomize(x, rng)
}

/// The randomizer with its budget test precomputed.
#[derive(Debug, Clone, Copy)]
pub struct BudgetAwareRandomizer {
    range: DataRange,
    scale: f64,
    clamp: bool,
}

impl BudgetAwareRandomizer {
    pub fn new(budget: PrivacyBudget, range: DataRange, precision: PrecisionRequirement) -> Result<Self> {
        Ok(BudgetAwareRandomizer {
            range,
            scale: range.delta() / budget.epsilon_s,
            clamp: clamps(&budget, &range, &precision)?,
        })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn clamps(&self) -> bool {
        self.clamp
    }

    pub fn randomize<R: Rng + ?Sized>(&self, x: f64, rng: &mut R) -> Result<f64> {
        if !self.range.contains(x) {
            return Err(Error::OutOfRange {
                value: x,
                min: self.range.x_min,
                max: self.range.x_max,
            });
        }
        let y = x + laplace_from_uniform(self.scale, rng);
        Ok(if self.clamp { self.range.clamp(y) } else { y })
    }
}
