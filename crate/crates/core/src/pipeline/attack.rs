//! Likelihood-linkage re-identification attack.
//!
//! The attacker learns a profile per contributor from non-anonymized
//! history: a Gaussian over reported values and a smoothed distribution over
//! the position at which the contributor's value is delivered. Each observed
//! batch is then matched to contributors by maximum total log-likelihood.

use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Samples per contributor the attacker needs before it can profile.
pub const MIN_HISTORY: usize = 10;

/// Variance floor for degenerate (constant) profiles.
pub const VARIANCE_FLOOR: f64 = 1e-6;

// log-likelihoods are scaled to integers for the assignment solver
const LL_SCALE: f64 = 1e6;
const LL_MIN: f64 = -1e9;

/// One value as delivered, and the 1-based position it was delivered at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub value: f64,
    pub position: usize,
}

/// Non-anonymized history: `samples[c-1]` holds contributor `c`'s
/// observations.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ContributorHistory {
    samples: Vec<Vec<Observation>>,
}

impl ContributorHistory {
    pub fn new(samples: Vec<Vec<Observation>>) -> Self {
        ContributorHistory { samples }
    }

    /// Builds a history from batches of `(contributor, value)` pairs in
    /// delivery order.
    pub fn from_batches<'a, I>(n: usize, batches: I) -> Self
    where
        I: IntoIterator<Item = &'a [(usize, f64)]>,
    {
        let mut samples = vec![Vec::new(); n];
        for batch in batches {
            for (p, &(c, value)) in batch.iter().enumerate() {
                samples[c - 1].push(Observation { value, position: p + 1 });
            }
        }
        ContributorHistory { samples }
    }

    pub fn n(&self) -> usize {
        self.samples.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Matching {
    /// One-to-one assignment maximizing total log-likelihood.
    #[default]
    Optimal,
    /// Each value goes to its individually most likely contributor.
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackOptions {
    pub matching: Matching,
    /// Laplace scale the attacker assumes was added to every value; its
    /// variance `2λ²` widens each value profile.
    pub noise_scale: f64,
    pub use_position: bool,
}

impl Default for AttackOptions {
    fn default() -> Self {
        AttackOptions {
            matching: Matching::Optimal,
            noise_scale: 0.0,
            use_position: true,
        }
    }
}

/// Macro-averaged precision and recall over contributors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub precision: f64,
    pub recall: f64,
    pub per_contributor: Vec<ContributorScore>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ContributorScore {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

impl ContributorScore {
    pub fn precision(&self) -> f64 {
        ratio(self.true_positives, self.true_positives + self.false_positives)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.true_positives, self.true_positives + self.false_negatives)
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone)]
struct Profile {
    mean: f64,
    variance: f64,
    ln_position: Vec<f64>,
}

impl Profile {
    fn fit(samples: &[Observation], n: usize, extra_variance: f64) -> Profile {
        let m = samples.len() as f64;
        let mean = samples.iter().map(|o| o.value).sum::<f64>() / m;
        let var = samples.iter().map(|o| (o.value - mean).powi(2)).sum::<f64>() / m;
        let mut counts = vec![1.0; n];
        for o in samples {
            if (1..=n).contains(&o.position) {
                counts[o.position - 1] += 1.0;
            }
        }
        let total: f64 = counts.iter().sum();
        Profile {
            mean,
            variance: (var + extra_variance).max(VARIANCE_FLOOR),
            ln_position: counts.into_iter().map(|c| (c / total).ln()).collect(),
        }
    }

    fn log_likelihood(&self, value: f64, position: usize, use_position: bool) -> f64 {
        let gauss = -0.5 * (2.0 * std::f64::consts::PI * self.variance).ln()
            - (value - self.mean).powi(2) / (2.0 * self.variance);
        let pos = if use_position { self.ln_position[position - 1] } else { 0.0 };
        (gauss + pos).max(LL_MIN)
    }
}

/// Re-identifies every value of every batch and scores the guesses against
/// `truth`, where `truth[b][p]` is the contributor whose value sits at
/// position `p` of batch `b`.
pub fn linkage_attack(
    history: &ContributorHistory,
    batches: &[Vec<f64>],
    truth: &[Vec<usize>],
    options: &AttackOptions,
) -> Result<AttackOutcome> {
    let n = history.n();
    if n == 0 {
        return Err(Error::Empty("attack history"));
    }
    if let Some((c, s)) = history.samples.iter().enumerate().find(|(_, s)| s.len() < MIN_HISTORY) {
        return Err(Error::Degenerate(format!(
            "contributor {} has {} history samples, {MIN_HISTORY} needed",
            c + 1,
            s.len()
        )));
    }
    if batches.len() != truth.len() {
        return Err(Error::SizeMismatch {
            expected: batches.len(),
            found: truth.len(),
        });
    }
    let extra = 2.0 * options.noise_scale * options.noise_scale;
    let profiles: Vec<Profile> = history.samples.iter().map(|s| Profile::fit(s, n, extra)).collect();

    let mut scores = vec![ContributorScore::default(); n];
    for (batch, who) in batches.iter().zip(truth) {
        if batch.len() != n || who.len() != n {
            return Err(Error::SizeMismatch {
                expected: n,
                found: batch.len().min(who.len()),
            });
        }
        let guesses = match options.matching {
            Matching::Optimal => assign_optimal(&profiles, batch, options.use_position),
            Matching::Greedy => assign_greedy(&profiles, batch, options.use_position),
        };
        for (&guess, &actual) in guesses.iter().zip(who) {
            if !(1..=n).contains(&actual) {
                return Err(Error::Degenerate(format!("truth names contributor {actual}")));
            }
            if guess == actual {
                scores[actual - 1].true_positives += 1;
            } else {
                scores[guess - 1].false_positives += 1;
                scores[actual - 1].false_negatives += 1;
            }
        }
    }
    let precision = scores.iter().map(ContributorScore::precision).sum::<f64>() / n as f64;
    let recall = scores.iter().map(ContributorScore::recall).sum::<f64>() / n as f64;
    Ok(AttackOutcome {
        precision,
        recall,
        per_contributor: scores,
    })
}

fn assign_optimal(profiles: &[Profile], batch: &[f64], use_position: bool) -> Vec<usize> {
    let n = profiles.len();
    let weights = Matrix::from_fn(n, n, |(p, c)| {
        (profiles[c].log_likelihood(batch[p], p + 1, use_position) * LL_SCALE).round() as i64
    });
    let (_, assignment) = kuhn_munkres(&weights);
    assignment.into_iter().map(|c| c + 1).collect()
}

fn assign_greedy(profiles: &[Profile], batch: &[f64], use_position: bool) -> Vec<usize> {
    batch
        .iter()
        .enumerate()
        .map(|(p, &v)| {
            let (best, _) = profiles
                .iter()
                .enumerate()
                .map(|(c, prof)| (c, prof.log_likelihood(v, p + 1, use_position)))
                .fold((0, f64::NEG_INFINITY), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
            best + 1
        })
        .collect()
}
