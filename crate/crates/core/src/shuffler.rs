//! Robust shuffler.
//!
//! Given one timestamp's noisy values in arrival order, the shuffler checks
//! whether the Kendall-tau sensitivity of the graph-derived partition lies in
//! `[α, 10α]`. If so it refines the groups, samples a Mallows permutation
//! with `θ = α/Δ` centered at the data permutation, and rearranges by
//! `σ* = σ_ŷ⁻¹∘τ`. Otherwise it falls back to a uniform-cycle shuffle of the
//! data permutation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grouping::{initial_partition, refine_groups, sensitivity, ContributorGraph, Partition};
use crate::mallows::{self, MallowsParams};
use crate::permutation::Permutation;

/// Smallest spread the Mallows branch will use.
pub const MIN_THETA: f64 = 0.1;

/// Upper end of the applicability window is `SENSITIVITY_WINDOW * α`.
pub const SENSITIVITY_WINDOW: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Mallows,
    UniformCycle,
}

/// One timestamp's perturbed values in arrival order.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyBatch {
    values: Vec<f64>,
    arrival: Permutation,
    timestamp: u64,
}

impl NoisyBatch {
    /// `values[p-1]` arrived at position `p`; `arrival` is the data
    /// permutation (`arrival(i)` = position of contributor `i`).
    pub fn new(values: Vec<f64>, arrival: Permutation, timestamp: u64) -> Result<Self> {
        if values.len() != arrival.len() {
            return Err(Error::SizeMismatch {
                expected: arrival.len(),
                found: values.len(),
            });
        }
        if values.len() < 2 {
            return Err(Error::Degenerate("a batch needs at least two contributors".into()));
        }
        Ok(NoisyBatch {
            values,
            arrival,
            timestamp,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn arrival(&self) -> &Permutation {
        &self.arrival
    }

    pub fn timestamp(&self) -> u64 {
        self.timestamp
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Anonymized output. Carries no contributor identifiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShuffledBatch {
    pub values: Vec<f64>,
    pub timestamp: u64,
    pub branch_used: Branch,
}

/// Everything the shuffler decided for one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct ShufflePlan {
    pub branch: Branch,
    /// Sensitivity of the graph-derived partition.
    pub initial_sensitivity: u64,
    /// Sensitivity after refinement (Mallows branch only).
    pub refined_sensitivity: Option<u64>,
    pub theta: Option<f64>,
    /// The Mallows draw `τ` (Mallows branch only).
    pub mallows_draw: Option<Permutation>,
    /// `σ*`: output position `i` receives the value at arrival position `σ*(i)`.
    pub rearrangement: Permutation,
}

impl ShufflePlan {
    /// Contributor ids in output order. Only meaningful to an omniscient
    /// evaluation harness.
    pub fn output_contributors(&self, arrival: &Permutation) -> Result<Vec<usize>> {
        let arrival_to_contributor = arrival.inverse().to_one_line();
        self.rearrangement.apply(&arrival_to_contributor)
    }
}

/// `α ≤ Δ ≤ 10α`.
pub fn in_mallows_window(sensitivity: u64, alpha: f64) -> bool {
    let s = sensitivity as f64;
    alpha <= s && s <= SENSITIVITY_WINDOW * alpha
}

/// Rearrangement that moves contributor `i` from arrival position
/// `arrival(i)` to output position `target(i)`, i.e. `arrival∘target⁻¹`.
fn rearrangement_for(arrival: &Permutation, target: &Permutation) -> Result<Permutation> {
    arrival.compose(&target.inverse())
}

/// Decides the rearrangement for a batch with data permutation `arrival`.
pub fn plan_shuffle<R: Rng + ?Sized>(
    arrival: &Permutation,
    k: usize,
    graph: &ContributorGraph,
    alpha: f64,
    rng: &mut R,
) -> Result<ShufflePlan> {
    let n = arrival.len();
    if n < 2 {
        return Err(Error::Degenerate("cannot anonymize a single contributor".into()));
    }
    if graph.n() != n {
        return Err(Error::config("graph.n", format!("graph has {} nodes, batch has {n}", graph.n())));
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::config("budget.alpha", format!("{alpha} must be positive")));
    }
    let initial = initial_partition(graph, k)?;
    let initial_sensitivity = sensitivity(arrival, &initial)?;

    if in_mallows_window(initial_sensitivity, alpha) {
        let refined = if 1 < k && k < n { refine_groups(arrival, k)? } else { initial };
        let refined_sensitivity = sensitivity(arrival, &refined)?;
        if refined_sensitivity > 0 {
            let theta = (alpha / refined_sensitivity as f64).max(MIN_THETA);
            let params = MallowsParams::new(arrival.clone(), theta)?;
            let tau = mallows::sample(&params, rng);
            let rearrangement = rearrangement_for(arrival, &tau)?;
            return Ok(ShufflePlan {
                branch: Branch::Mallows,
                initial_sensitivity,
                refined_sensitivity: Some(refined_sensitivity),
                theta: Some(theta),
                mallows_draw: Some(tau),
                rearrangement,
            });
        }
    }

    Ok(ShufflePlan {
        branch: Branch::UniformCycle,
        initial_sensitivity,
        refined_sensitivity: None,
        theta: None,
        mallows_draw: None,
        rearrangement: rearrangement_for(arrival, &arrival.sattolo_shuffle(rng)?)?,
    })
}

/// Shuffles a batch and returns the plan alongside it.
pub fn shuffle_traced<R: Rng + ?Sized>(
    batch: &NoisyBatch,
    k: usize,
    graph: &ContributorGraph,
    alpha: f64,
    rng: &mut R,
) -> Result<(ShuffledBatch, ShufflePlan)> {
    let plan = plan_shuffle(&batch.arrival, k, graph, alpha, rng)?;
    let values = plan.rearrangement.apply(&batch.values)?;
    Ok((
        ShuffledBatch {
            values,
            timestamp: batch.timestamp,
            branch_used: plan.branch,
        },
        plan,
    ))
}

pub fn shuffle<R: Rng + ?Sized>(
    batch: &NoisyBatch,
    k: usize,
    graph: &ContributorGraph,
    alpha: f64,
    rng: &mut R,
) -> Result<ShuffledBatch> {
    shuffle_traced(batch, k, graph, alpha, rng).map(|(b, _)| b)
}

/// Partition used by the Mallows branch for this batch, if that branch
/// applies.
pub fn effective_partition(arrival: &Permutation, k: usize, graph: &ContributorGraph, alpha: f64) -> Result<Option<Partition>> {
    let initial = initial_partition(graph, k)?;
    if !in_mallows_window(sensitivity(arrival, &initial)?, alpha) {
        return Ok(None);
    }
    let n = arrival.len();
    let refined = if 1 < k && k < n { refine_groups(arrival, k)? } else { initial };
    Ok((sensitivity(arrival, &refined)? > 0).then_some(refined))
}
