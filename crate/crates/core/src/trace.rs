//! Reading traces: CSV ingestion and a synthetic smart-meter generator.
//!
//! A trace is a CSV file with the header `timestamp,device_id,value` and one
//! row per reading. Rows of the same timestamp appear in arrival order.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::{check_batch, SensorReading};
use crate::randomizer::DataRange;
use crate::seed::{self, Stage};

pub const HEADER: [&str; 3] = ["timestamp", "device_id", "value"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub timestamp: u64,
    pub device_id: usize,
    pub value: f64,
}

impl From<TraceRow> for SensorReading {
    fn from(r: TraceRow) -> Self {
        SensorReading {
            contributor_id: r.device_id,
            timestamp: r.timestamp,
            state: r.value,
        }
    }
}

/// Complete batches keyed by timestamp, plus the timestamps that were
/// dropped.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Ingested {
    pub batches: BTreeMap<u64, Vec<SensorReading>>,
    pub rejected: Vec<RejectedBatch>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RejectedBatch {
    pub timestamp: u64,
    pub reason: String,
}

pub fn write_trace<W: Write>(rows: &[TraceRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace_file(rows: &[TraceRow], path: &Path) -> Result<()> {
    write_trace(rows, std::fs::File::create(path)?)
}

/// Parses a trace, checking the header and that every value is finite and,
/// if `range` is given, inside it.
pub fn read_trace<R: Read>(input: R, range: Option<&DataRange>) -> Result<Vec<TraceRow>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = reader.headers().map_err(|e| Error::Data {
        line: 1,
        reason: e.to_string(),
    })?;
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(Error::Data {
            line: 1,
            reason: format!("expected header {:?}, found {:?}", HEADER.join(","), header.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Data {
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row: TraceRow = record.deserialize(None).map_err(|e| Error::Data {
            line,
            reason: e.to_string(),
        })?;
        if !row.value.is_finite() {
            return Err(Error::Data {
                line,
                reason: format!("non-finite value {}", row.value),
            });
        }
        if let Some(r) = range {
            if !r.contains(row.value) {
                return Err(Error::Data {
                    line,
                    reason: format!("value {} outside data range [{}, {}]", row.value, r.x_min(), r.x_max()),
                });
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Groups rows into per-timestamp batches, keeping file order as arrival
/// order. Timestamps without exactly one reading per device are rejected.
pub fn group_batches(rows: &[TraceRow], expected_n: usize) -> Ingested {
    let mut grouped: BTreeMap<u64, Vec<SensorReading>> = BTreeMap::new();
    for &row in rows {
        grouped.entry(row.timestamp).or_default().push(row.into());
    }
    let mut out = Ingested::default();
    for (t, readings) in grouped {
        match check_batch(&readings, expected_n) {
            Ok(_) => {
                out.batches.insert(t, readings);
            }
            Err(e) => out.rejected.push(RejectedBatch {
                timestamp: t,
                reason: e.to_string(),
            }),
        }
    }
    out
}

pub fn ingest(path: &Path, expected_n: usize, range: Option<&DataRange>) -> Result<Ingested> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let rows = read_trace(file, range)?;
    Ok(group_batches(&rows, expected_n))
}

/// Readings per synthetic day; the daily load cycle repeats with this period.
pub const SYNTH_PERIOD: f64 = 24.0;

/// Synthetic smart-meter trace with `n` devices over timestamps
/// `1..=t_count`.
///
/// Each device has a base load (skewed toward the low end of the range), a
/// daily cycle with its own amplitude and phase, and Gaussian fluctuation.
/// Values are clamped into `range`. Devices also have a typical reporting
/// latency, so arrival order is stable up to jitter.
pub fn synth(n: usize, t_count: u64, range: &DataRange, seed: u64) -> Vec<TraceRow> {
    let delta = range.delta();
    let devices: Vec<Device> = (1..=n)
        .map(|c| {
            let mut rng = seed::stream(seed, Stage::Synth, 0, c as u64);
            let u: f64 = rng.gen();
            Device {
                base: range.x_min() + 0.6 * delta * u * u,
                amplitude: delta * rng.gen_range(0.02..0.15),
                phase: rng.gen_range(0.0..std::f64::consts::TAU),
                spread: delta * rng.gen_range(0.015..0.045),
                latency: rng.gen(),
            }
        })
        .collect();

    let mut rows = Vec::with_capacity(n * t_count as usize);
    for t in 1..=t_count {
        let mut batch: Vec<(f64, TraceRow)> = devices
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let mut rng = seed::stream(seed, Stage::Synth, t, i as u64 + 1);
                let cycle = (std::f64::consts::TAU * t as f64 / SYNTH_PERIOD + d.phase).sin();
                let noise = Normal::new(0.0, d.spread).expect("positive spread").sample(&mut rng);
                let value = range.clamp(d.base + d.amplitude * cycle + noise);
                let jitter = Normal::new(0.0, LATENCY_JITTER).expect("positive jitter").sample(&mut rng);
                (
                    d.latency + jitter,
                    TraceRow {
                        timestamp: t,
                        device_id: i + 1,
                        value,
                    },
                )
            })
            .collect();
        batch.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.device_id.cmp(&b.1.device_id)));
        rows.extend(batch.into_iter().map(|(_, r)| r));
    }
    rows
}

const LATENCY_JITTER: f64 = 0.05;

struct Device {
    base: f64,
    amplitude: f64,
    phase: f64,
    spread: f64,
    latency: f64,
}
