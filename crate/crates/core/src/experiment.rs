//! Whole-trace runs, the attack split, and parameter sweeps.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::attack::{AttackOptions, AttackOutcome, MIN_HISTORY};
use crate::pipeline::{linkage_attack, run_rase, window_query, ContributorHistory, RaseRound, RunConfig, SensorReading};
use crate::shuffler::Branch;
use crate::trace::RejectedBatch;

/// Share of timestamps (earliest first) the attacker sees with labels.
pub const HISTORY_FRACTION: f64 = 0.8;

pub const DEFAULT_TRIALS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimestampReport {
    pub t: u64,
    pub estimate: f64,
    pub branch_used: Branch,
    pub aae: f64,
    pub mse: f64,
    pub shuffled: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedTimestamp {
    pub timestamp: u64,
    pub reason: String,
}

impl From<RejectedBatch> for RejectedTimestamp {
    fn from(r: RejectedBatch) -> Self {
        RejectedTimestamp {
            timestamp: r.timestamp,
            reason: r.reason,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub seed: u64,
    pub timestamps: Vec<TimestampReport>,
    /// Mean of the per-timestamp AAE.
    pub aae: f64,
    /// Mean of the per-timestamp MSE.
    pub mse: f64,
    /// Linkage attack on the last timestamps; absent when the trace is too
    /// short to train it.
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    #[serde(default)]
    pub rejected: Vec<RejectedTimestamp>,
}

impl RunReport {
    /// Pretty JSON with keys sorted.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&serde_json::to_value(self).expect("report serializes")).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Data {
            line: e.line() as u64,
            reason: format!("report: {e}"),
        })
    }

    pub fn mean_abs_aae(&self) -> f64 {
        self.timestamps.iter().map(|t| t.aae.abs()).sum::<f64>() / self.timestamps.len() as f64
    }
}

/// A full run: the report plus the rounds behind it.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub rounds: BTreeMap<u64, RaseRound>,
}

/// Runs every batch (timestamps in parallel) and evaluates the result.
pub fn run_trace(batches: &BTreeMap<u64, Vec<SensorReading>>, config: &RunConfig, seed: u64) -> Result<RunOutput> {
    config.validate()?;
    if batches.is_empty() {
        return Err(Error::Empty("trace"));
    }
    let rounds: BTreeMap<u64, RaseRound> = batches
        .par_iter()
        .map(|(&t, readings)| run_rase(readings, config, seed).map(|r| (t, r)))
        .collect::<Result<_>>()?;

    let estimates: BTreeMap<u64, f64> = rounds.iter().map(|(&t, r)| (t, r.estimate.estimate)).collect();
    let mut timestamps = Vec::with_capacity(rounds.len());
    for (&t, round) in &rounds {
        let (aae, mse) = round.harness.metrics()?;
        timestamps.push(TimestampReport {
            t,
            estimate: round.estimate.estimate,
            branch_used: round.shuffled.branch_used,
            aae,
            mse,
            shuffled: round.shuffled.values.clone(),
            window: config.window_w.and_then(|w| window_query(&estimates, t, w).ok()),
        });
    }
    let m = timestamps.len() as f64;
    let aae = timestamps.iter().map(|t| t.aae).sum::<f64>() / m;
    let mse = timestamps.iter().map(|t| t.mse).sum::<f64>() / m;

    let scale = config.randomizer()?.scale();
    let outcome = attack_rounds(&rounds, Scenario::Full, scale)?;
    let report = RunReport {
        config: config.clone(),
        seed,
        timestamps,
        aae,
        mse,
        precision: outcome.as_ref().map(|o| o.precision),
        recall: outcome.as_ref().map(|o| o.recall),
        rejected: Vec::new(),
    };
    Ok(RunOutput { report, rounds })
}

/// What the attacker gets to see for the held-out timestamps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// True readings in arrival order.
    Raw,
    /// Randomized readings in arrival order.
    RandomizedOnly,
    /// The shuffled output.
    Full,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Raw, Scenario::RandomizedOnly, Scenario::Full];
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Raw => "raw",
            Scenario::RandomizedOnly => "randomized_only",
            Scenario::Full => "full",
        })
    }
}

/// Number of history timestamps out of `total`, or `None` if either side
/// of the split would be too small.
pub fn history_split(total: usize) -> Option<usize> {
    let h = (total as f64 * HISTORY_FRACTION).ceil() as usize;
    (h >= MIN_HISTORY && h < total).then_some(h)
}

/// Linkage attack over `rounds`. The attacker knows the true readings and
/// arrival positions of the earliest timestamps and the noise scale, and
/// re-identifies the rest as seen under `scenario`.
pub fn attack_rounds(rounds: &BTreeMap<u64, RaseRound>, scenario: Scenario, noise_scale: f64) -> Result<Option<AttackOutcome>> {
    let Some(h) = history_split(rounds.len()) else {
        return Ok(None);
    };
    let ordered: Vec<&RaseRound> = rounds.values().collect();
    let n = ordered[0].harness.truth.len();
    let labelled: Vec<Vec<(usize, f64)>> = ordered[..h]
        .iter()
        .map(|r| r.harness.arrivals().into_iter().map(|c| (c, r.harness.truth[c - 1])).collect())
        .collect();
    let history = ContributorHistory::from_batches(n, labelled.iter().map(Vec::as_slice));

    let mut batches = Vec::with_capacity(ordered.len() - h);
    let mut truth = Vec::with_capacity(ordered.len() - h);
    for r in &ordered[h..] {
        let (values, who) = match scenario {
            Scenario::Raw | Scenario::RandomizedOnly => {
                let who = r.harness.arrivals();
                let source = if scenario == Scenario::Raw { &r.harness.truth } else { &r.harness.noisy };
                (who.iter().map(|&c| source[c - 1]).collect(), who)
            }
            Scenario::Full => (r.shuffled.values.clone(), r.harness.output_contributors()),
        };
        batches.push(values);
        truth.push(who);
    }
    let options = AttackOptions {
        noise_scale: if scenario == Scenario::Raw { 0.0 } else { noise_scale },
        ..AttackOptions::default()
    };
    linkage_attack(&history, &batches, &truth, &options).map(Some)
}

/// Attack on a previously written report. The run is replayed from the
/// trace and the report's config and seed to recover the hidden truth.
pub fn attack_report(report: &RunReport, batches: &BTreeMap<u64, Vec<SensorReading>>) -> Result<AttackOutcome> {
    let wanted: BTreeMap<u64, Vec<SensorReading>> = report
        .timestamps
        .iter()
        .map(|ts| {
            batches
                .get(&ts.t)
                .cloned()
                .map(|b| (ts.t, b))
                .ok_or_else(|| Error::Mismatch(format!("timestamp {} of the report is missing from the trace", ts.t)))
        })
        .collect::<Result<_>>()?;
    let replay = run_trace(&wanted, &report.config, report.seed)?;
    for (ts, again) in report.timestamps.iter().zip(&replay.report.timestamps) {
        if ts.shuffled != again.shuffled {
            return Err(Error::Mismatch(format!(
                "timestamp {}: report does not match the trace under its config and seed",
                ts.t
            )));
        }
    }
    let scale = report.config.randomizer()?.scale();
    attack_rounds(&replay.rounds, Scenario::Full, scale)?.ok_or_else(|| {
        Error::Mismatch(format!(
            "{} timestamps are too few for the attack split",
            report.timestamps.len()
        ))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    EpsilonS,
    Alpha,
    K,
    N,
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParam::EpsilonS => "epsilon_s",
            SweepParam::Alpha => "alpha",
            SweepParam::K => "k",
            SweepParam::N => "n",
        })
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "epsilon_s" => Ok(SweepParam::EpsilonS),
            "alpha" => Ok(SweepParam::Alpha),
            "k" => Ok(SweepParam::K),
            "n" => Ok(SweepParam::N),
            other => Err(Error::config(
                "param",
                format!("unknown sweep parameter {other:?}; expected epsilon_s, alpha, k or n"),
            )),
        }
    }
}

fn count(param: SweepParam, value: f64) -> Result<usize> {
    if value.fract() != 0.0 || value < 1.0 || !value.is_finite() {
        return Err(Error::config(param.to_string(), format!("{value} is not a positive integer")));
    }
    Ok(value as usize)
}

impl SweepParam {
    /// `base` with this parameter set to `value`.
    pub fn apply(self, base: &RunConfig, value: f64) -> Result<RunConfig> {
        let mut c = base.clone();
        match self {
            SweepParam::EpsilonS => c.budget = c.budget.with_epsilon_s(value)?,
            SweepParam::Alpha => c.budget = c.budget.with_alpha(value)?,
            SweepParam::K => c.k = count(self, value)?,
            SweepParam::N => {
                let n = count(self, value)?;
                if n > base.n {
                    return Err(Error::config("n", format!("{n} exceeds the {} contributors in the config", base.n)));
                }
                c = base.restricted_to(n)?;
                c.k = c.k.min(n);
            }
        }
        c.validate()?;
        Ok(c)
    }
}

/// Keeps the readings of contributors `1..=n`, in arrival order.
pub fn restrict_batches(batches: &BTreeMap<u64, Vec<SensorReading>>, n: usize) -> BTreeMap<u64, Vec<SensorReading>> {
    batches
        .iter()
        .map(|(&t, b)| (t, b.iter().copied().filter(|r| r.contributor_id <= n).collect()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param_value: f64,
    pub aae: f64,
    pub mse: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

/// One row per value, each averaging `trials` runs with seeds
/// `seed, seed + 1, ...`.
pub fn sweep(
    base: &RunConfig,
    batches: &BTreeMap<u64, Vec<SensorReading>>,
    param: SweepParam,
    values: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::config("values", "no sweep values given"));
    }
    if trials == 0 {
        return Err(Error::config("trials", "must be positive"));
    }
    let configs: Vec<RunConfig> = values.iter().map(|&v| param.apply(base, v)).collect::<Result<_>>()?;
    configs
        .par_iter()
        .zip(values)
        .map(|(config, &value)| {
            let data = if param == SweepParam::N {
                restrict_batches(batches, config.n)
            } else {
                batches.clone()
            };
            let reports: Vec<RunReport> = (0..trials as u64)
                .into_par_iter()
                .map(|i| run_trace(&data, config, seed.wrapping_add(i)).map(|o| o.report))
                .collect::<Result<_>>()?;
            let m = reports.len() as f64;
            let avg = |f: &dyn Fn(&RunReport) -> f64| reports.iter().map(f).sum::<f64>() / m;
            let avg_opt = |f: &dyn Fn(&RunReport) -> Option<f64>| {
                reports.iter().map(f).collect::<Option<Vec<f64>>>().map(|v| v.iter().sum::<f64>() / m)
            };
            Ok(SweepRow {
                param_value: value,
                aae: avg(&|r| r.aae),
                mse: avg(&|r| r.mse),
                precision: avg_opt(&|r| r.precision),
                recall: avg_opt(&|r| r.recall),
            })
        })
        .collect()
}

pub fn write_sweep<W: std::io::Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
