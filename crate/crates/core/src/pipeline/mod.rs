//! End-to-end randomize, shuffle, estimate for one timestamp, plus windowed
//! queries over per-timestamp estimates.

pub mod attack;
pub mod metrics;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{self, EstimateReport, EstimatorKind, DEFAULT_BOOTSTRAP_B};
use crate::grouping::ContributorGraph;
use crate::permutation::{data_permutation_from_arrivals, Permutation};
use crate::randomizer::{min_budget, BudgetAwareRandomizer, DataRange, PrecisionRequirement, PrivacyBudget};
use crate::seed::{self, Stage};
use crate::shuffler::{self, NoisyBatch, ShufflePlan, ShuffledBatch};

pub use attack::{linkage_attack, ContributorHistory, Matching, Observation};
pub use metrics::{aae, mse, EvaluationMetrics};

/// One contributor's reading at one timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorReading {
    pub contributor_id: usize,
    pub timestamp: u64,
    pub state: f64,
}

/// Full configuration of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConfig")]
pub struct RunConfig {
    pub n: usize,
    pub range: DataRange,
    pub precision: PrecisionRequirement,
    pub budget: PrivacyBudget,
    pub k: usize,
    pub graph: ContributorGraph,
    pub estimator: EstimatorKind,
    pub bootstrap_b: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_w: Option<u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    n: usize,
    range: DataRange,
    precision: PrecisionRequirement,
    budget: PrivacyBudget,
    k: usize,
    #[serde(default)]
    graph: Option<ContributorGraph>,
    #[serde(default)]
    estimator: EstimatorKind,
    #[serde(default = "default_b")]
    bootstrap_b: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    window_w: Option<u64>,
}

fn default_b() -> usize {
    DEFAULT_BOOTSTRAP_B
}

impl TryFrom<RawConfig> for RunConfig {
    type Error = Error;
    fn try_from(r: RawConfig) -> Result<Self> {
        let graph = match r.graph {
            Some(g) => g,
            None => ContributorGraph::edgeless(r.n.max(1))?,
        };
        let config = RunConfig {
            n: r.n,
            range: r.range,
            precision: r.precision,
            budget: r.budget,
            k: r.k,
            graph,
            estimator: r.estimator,
            bootstrap_b: r.bootstrap_b,
            seed: r.seed,
            window_w: r.window_w,
        };
        config.validate()?;
        Ok(config)
    }
}

impl RunConfig {
    /// A configuration with an edgeless graph and the sample estimator.
    pub fn new(
        n: usize,
        range: DataRange,
        precision: PrecisionRequirement,
        budget: PrivacyBudget,
        k: usize,
    ) -> Result<Self> {
        let config = RunConfig {
            n,
            range,
            precision,
            budget,
            k,
            graph: ContributorGraph::edgeless(n.max(1))?,
            estimator: EstimatorKind::Sample,
            bootstrap_b: DEFAULT_BOOTSTRAP_B,
            seed: 0,
            window_w: None,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::config("n", format!("{} contributors; at least 2 are needed", self.n)));
        }
        if self.graph.n() != self.n {
            return Err(Error::config("graph.n", format!("{} does not match n = {}", self.graph.n(), self.n)));
        }
        if self.k == 0 || self.k > self.n {
            return Err(Error::config("k", format!("{} not in 1..={}", self.k, self.n)));
        }
        if self.bootstrap_b == 0 {
            return Err(Error::config("bootstrap_b", "must be positive"));
        }
        if self.window_w == Some(0) {
            return Err(Error::config("window_w", "must be positive"));
        }
        min_budget(&self.range, &self.precision)?;
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            // serde wraps our own errors; surface them unchanged when possible
            let msg = e.to_string();
            match msg.split_once("invalid configuration: ") {
                Some((_, rest)) => {
                    let rest = rest.split(" at line ").next().unwrap_or(rest);
                    let (field, reason) = rest.split_once(": ").unwrap_or(("config", rest));
                    Error::config(field, reason)
                }
                None => Error::config("config", msg),
            }
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&serde_json::to_value(self).expect("config serializes"))
            .expect("config serializes")
    }

    pub fn randomizer(&self) -> Result<BudgetAwareRandomizer> {
        BudgetAwareRandomizer::new(self.budget, self.range, self.precision)
    }

    /// Same configuration restricted to contributors `1..=n` (induced
    /// subgraph).
    pub fn restricted_to(&self, n: usize) -> Result<Self> {
        let edges = self.graph.edges().iter().copied().filter(|&[_, b]| b <= n);
        let mut c = self.clone();
        c.n = n;
        c.graph = ContributorGraph::new(n.max(1), edges)?;
        c.validate()?;
        Ok(c)
    }
}

/// Result of one randomize, shuffle, estimate round.
#[derive(Debug, Clone, PartialEq)]
pub struct RaseRound {
    pub shuffled: ShuffledBatch,
    pub estimate: EstimateReport,
    /// What the omniscient evaluation harness may see.
    pub harness: HarnessView,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarnessView {
    pub arrival: Permutation,
    /// True readings indexed by contributor.
    pub truth: Vec<f64>,
    /// Randomized readings indexed by contributor, before shuffling.
    pub noisy: Vec<f64>,
    pub plan: ShufflePlan,
}

impl HarnessView {
    pub fn true_mean(&self) -> f64 {
        self.truth.iter().sum::<f64>() / self.truth.len() as f64
    }

    /// Contributor id at every position of the shuffled batch.
    pub fn output_contributors(&self) -> Vec<usize> {
        self.plan
            .output_contributors(&self.arrival)
            .expect("plan matches its arrival permutation")
    }

    /// Contributor ids in arrival order.
    pub fn arrivals(&self) -> Vec<usize> {
        self.arrival.inverse().to_one_line()
    }

    pub fn metrics(&self) -> Result<(f64, f64)> {
        Ok((aae(&self.truth, &self.noisy)?, mse(&self.truth, &self.noisy)?))
    }
}

/// Checks one timestamp's readings (in arrival order) and returns the
/// timestamp and the arrival sequence of contributor ids.
pub fn check_batch(readings: &[SensorReading], n: usize) -> Result<(u64, Vec<usize>)> {
    let Some(first) = readings.first() else {
        return Err(Error::Empty("batch"));
    };
    let t = first.timestamp;
    if readings.len() != n {
        return Err(Error::IncompleteBatch {
            timestamp: t,
            reason: format!("{} readings for {n} contributors", readings.len()),
        });
    }
    let mut seen = vec![false; n];
    let mut arrivals = Vec::with_capacity(n);
    for r in readings {
        if r.timestamp != t {
            return Err(Error::IncompleteBatch {
                timestamp: t,
                reason: format!("reading for timestamp {} mixed in", r.timestamp),
            });
        }
        if r.contributor_id == 0 || r.contributor_id > n {
            return Err(Error::IncompleteBatch {
                timestamp: t,
                reason: format!("contributor {} outside 1..={n}", r.contributor_id),
            });
        }
        if std::mem::replace(&mut seen[r.contributor_id - 1], true) {
            return Err(Error::IncompleteBatch {
                timestamp: t,
                reason: format!("duplicate reading from contributor {}", r.contributor_id),
            });
        }
        arrivals.push(r.contributor_id);
    }
    Ok((t, arrivals))
}

/// Randomizes every reading, shuffles the batch, and estimates its mean.
///
/// `readings` are in arrival order. Randomness comes from substreams of
/// `seed` keyed by contributor and timestamp.
pub fn run_rase(readings: &[SensorReading], config: &RunConfig, seed: u64) -> Result<RaseRound> {
    let (t, arrivals) = check_batch(readings, config.n)?;
    let arrival = data_permutation_from_arrivals(&arrivals)?;
    let br = config.randomizer()?;

    let noisy_in_arrival: Vec<f64> = readings
        .par_iter()
        .map(|r| {
            let mut rng = seed::stream(seed, Stage::Randomize, r.contributor_id as u64, t);
            br.randomize(r.state, &mut rng)
        })
        .collect::<Result<_>>()?;

    let mut truth = vec![0.0; config.n];
    let mut noisy = vec![0.0; config.n];
    for (r, &y) in readings.iter().zip(&noisy_in_arrival) {
        truth[r.contributor_id - 1] = r.state;
        noisy[r.contributor_id - 1] = y;
    }

    let batch = NoisyBatch::new(noisy_in_arrival, arrival.clone(), t)?;
    let mut rng = seed::stream(seed, Stage::Shuffle, 0, t);
    let (shuffled, plan) = shuffler::shuffle_traced(&batch, config.k, &config.graph, config.budget.alpha(), &mut rng)?;

    let mut rng = seed::stream(seed, Stage::Estimate, 0, t);
    let estimate = estimator::estimate(config.estimator, &shuffled.values, config.bootstrap_b, &mut rng)?;

    Ok(RaseRound {
        shuffled,
        estimate,
        harness: HarnessView {
            arrival,
            truth,
            noisy,
            plan,
        },
    })
}

/// Mean of the estimates at `t_q - w + 1 ..= t_q`.
pub fn window_query(estimates: &BTreeMap<u64, f64>, t_q: u64, w: u64) -> Result<f64> {
    if w == 0 {
        return Err(Error::config("window_w", "must be positive"));
    }
    if w > t_q + 1 {
        return Err(Error::MissingTimestamp { t_q, w, missing: 0 });
    }
    let mut sum = 0.0;
    for t in t_q + 1 - w..=t_q {
        match estimates.get(&t) {
            Some(v) => sum += v,
            None => return Err(Error::MissingTimestamp { t_q, w, missing: t }),
        }
    }
    Ok(sum / w as f64)
}
