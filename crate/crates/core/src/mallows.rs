//! The Mallows model over permutations under Kendall-tau distance.
//!
//! `Pr[σ] = exp(-θ·d_K(σ, σ0)) / Z(θ)`, with the normalizer in closed form
//! `Z(θ) = Π_{i=1}^{n-1} Σ_{j=0}^{i} e^{-jθ}`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::permutation::Permutation;

/// Center `σ0` and spread `θ >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MallowsParams {
    center: Permutation,
    theta: f64,
}

impl MallowsParams {
    pub fn new(center: Permutation, theta: f64) -> Result<Self> {
        if !(theta.is_finite() && theta >= 0.0) {
            return Err(Error::config("theta", format!("{theta} must be finite and non-negative")));
        }
        Ok(MallowsParams { center, theta })
    }

    pub fn center(&self) -> &Permutation {
        &self.center
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn n(&self) -> usize {
        self.center.len()
    }
}

/// `ln Z(θ)` for permutations of size `n`.
pub fn ln_normalizer(n: usize, theta: f64) -> f64 {
    (1..n).map(|i| ln_geometric_sum(i + 1, theta)).sum()
}

/// `Z(θ)`; may overflow to infinity for large `n` at small `θ`, in which case
/// use [`ln_normalizer`].
pub fn normalizer(n: usize, theta: f64) -> f64 {
    ln_normalizer(n, theta).exp()
}

/// `ln Σ_{j=0}^{m-1} e^{-jθ}`.
fn ln_geometric_sum(m: usize, theta: f64) -> f64 {
    if theta == 0.0 {
        return (m as f64).ln();
    }
    // (1 - e^{-mθ}) / (1 - e^{-θ}), stable for small θ
    let num = -(-(m as f64) * theta).exp_m1();
    let den = -(-theta).exp_m1();
    num.ln() - den.ln()
}

/// Probability of `sigma` under the model.
pub fn pmf(sigma: &Permutation, params: &MallowsParams) -> Result<f64> {
    let d = sigma.kendall_tau(&params.center)?;
    Ok((-params.theta * d as f64 - ln_normalizer(params.n(), params.theta)).exp())
}

/// Exact draw by repeated insertion.
///
/// Item `i` is inserted `r` places from the end of the partial ranking with
/// probability proportional to `e^{-θr}`, which adds exactly `r` discordant
/// pairs. The resulting ranking `π` is then carried to the center as `π∘σ0`,
/// so `d_K(π∘σ0, σ0) = d_K(π, id)`.
pub fn sample<R: Rng + ?Sized>(params: &MallowsParams, rng: &mut R) -> Permutation {
    let n = params.n();
    let mut ranking: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        let r = truncated_geometric(i + 1, params.theta, rng);
        ranking.insert(i - r, i);
    }
    let offsets = Permutation::from_zero_based_unchecked(ranking);
    offsets
        .compose(&params.center)
        .expect("sizes agree by construction")
}

/// Draws `r` in `0..m` with `Pr[r] ∝ e^{-θr}`.
fn truncated_geometric<R: Rng + ?Sized>(m: usize, theta: f64, rng: &mut R) -> usize {
    if m == 1 {
        return 0;
    }
    if theta == 0.0 {
        return rng.gen_range(0..m);
    }
    let u: f64 = rng.gen();
    // inverse CDF: F(r) = (1 - e^{-θ(r+1)}) / (1 - e^{-θm})
    let total = -(-(m as f64) * theta).exp_m1();
    let r = (-(-u * total).ln_1p() / theta).floor();
    (r as usize).min(m - 1)
}
