//! Per-epoch station counts: CSV loading and a synthetic generator.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::SimulationError;
use crate::rng::{Slot, StreamKey, Substream};

pub const DATASET_HEADER: [&str; 3] = ["epoch", "station_id", "count"];

/// Epochs per simulated day for the diurnal profile (30-minute epochs).
const EPOCHS_PER_DAY: f64 = 48.0;
/// Popularity exponent of the station weights.
const ZIPF_EXPONENT: f64 = 0.6;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: u64,
    pub station_id: String,
    #[serde(rename = "count")]
    pub vehicle_count: u64,
}

impl EpochRecord {
    pub fn new(epoch: u64, station_id: impl Into<String>, vehicle_count: u64) -> Self {
        Self {
            epoch,
            station_id: station_id.into(),
            vehicle_count,
        }
    }
}

/// Parse a dataset CSV with header `epoch,station_id,count`.
pub fn load_dataset<R: Read>(source: R) -> Result<Vec<EpochRecord>, SimulationError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let header = reader.headers().map_err(|e| csv_error(e, 1))?.clone();
    if header.iter().ne(DATASET_HEADER.iter().copied()) {
        return Err(SimulationError::Parse {
            line: 1,
            message: format!(
                "expected header \"epoch,station_id,count\", got \"{}\"",
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        // fallback line number when the reader has no position
        let fallback = i as u64 + 2;
        let row = row.map_err(|e| csv_error(e, fallback))?;
        let line = row.position().map_or(fallback, |p| p.line());
        let field = |idx: usize, name: &str| {
            row.get(idx).ok_or_else(|| SimulationError::Parse {
                line,
                message: format!("missing field {name}"),
            })
        };
        let parse = |idx: usize, name: &str| -> Result<u64, SimulationError> {
            let raw = field(idx, name)?;
            raw.parse().map_err(|_| SimulationError::Parse {
                line,
                message: format!("{name} is not a nonnegative integer: {raw:?}"),
            })
        };
        let epoch = parse(0, "epoch")?;
        let station = field(1, "station_id")?;
        if station.is_empty() {
            return Err(SimulationError::Parse {
                line,
                message: "empty station_id".into(),
            });
        }
        let count = parse(2, "count")?;
        if !seen.insert((epoch, station.to_owned())) {
            return Err(SimulationError::DuplicateKey {
                epoch,
                station: station.to_owned(),
                line,
            });
        }
        out.push(EpochRecord::new(epoch, station, count));
    }
    Ok(out)
}

fn csv_error(e: csv::Error, fallback: u64) -> SimulationError {
    let line = e.position().map_or(fallback, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => SimulationError::Io(io.to_string()),
        other => SimulationError::Parse {
            line,
            message: format!("{other:?}"),
        },
    }
}

pub fn write_dataset<W: Write>(records: &[EpochRecord], sink: W) -> Result<(), SimulationError> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(DATASET_HEADER)?;
    for r in records {
        writer.write_record([
            r.epoch.to_string(),
            r.station_id.clone(),
            r.vehicle_count.to_string(),
        ])?;
    }
    writer
        .flush()
        .map_err(|e| SimulationError::Io(e.to_string()))?;
    Ok(())
}

pub fn station_name(index: u64) -> String {
    format!("S{index:04}")
}

/// Deterministic synthetic station counts.
///
/// Station `S0000` is the busiest; popularity falls off as `(s+1)^-0.6`.
/// The number of vehicles on the road follows a daily cycle between 30%
/// and 80% of `total_vehicles`, and each station count gets ±20% jitter.
/// Counts are floored, so every epoch sums to at most `total_vehicles`.
pub fn synth_dataset(
    stations: u64,
    epochs: u64,
    total_vehicles: u64,
    seed: u64,
) -> Vec<EpochRecord> {
    let weights: Vec<f64> = (0..stations)
        .map(|s| ((s + 1) as f64).powf(-ZIPF_EXPONENT))
        .collect();
    let names: Vec<String> = (0..stations).map(station_name).collect();
    let mut out = Vec::with_capacity((stations * epochs) as usize);
    for t in 0..epochs {
        let phase = 2.0 * PI * t as f64 / EPOCHS_PER_DAY;
        let active = total_vehicles as f64 * (0.55 - 0.25 * phase.cos());
        let jittered: Vec<f64> = weights
            .iter()
            .enumerate()
            .map(|(s, w)| {
                let mut rng = Substream::new(seed, StreamKey::new(s as u64, t, u64::MAX, Slot::A));
                w * (0.8 + 0.4 * rng.next_f64())
            })
            .collect();
        let norm: f64 = jittered.iter().sum();
        for (s, w) in jittered.iter().enumerate() {
            let count = (active * w / norm).floor() as u64;
            out.push(EpochRecord::new(t, names[s].clone(), count));
        }
    }
    out
}
