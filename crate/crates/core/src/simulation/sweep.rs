//! Privacy/accuracy trade-off over a range of No-population sampling rates.

use std::collections::BTreeSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{run_simulation, EpochRecord, SimulationConfig, SimulationError, Variant};
use crate::privacy::{crowd_size, epsilon_dp, expected_locations};

pub const SWEEP_HEADER: [&str; 7] = [
    "pi_s_no",
    "mean_abs_err",
    "mean_rel_err",
    "epsilon_dp",
    "crowd_expected",
    "crowd_threshold",
    "expected_locations",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub pi_s_no: f64,
    pub total_owners: u64,
    /// Mean over epochs of the FromYes absolute error.
    pub mean_abs_err: f64,
    pub mean_rel_err: f64,
    pub epsilon_dp: f64,
    pub crowd_expected: f64,
    pub crowd_threshold: u64,
    /// Over every station in the dataset.
    pub expected_locations: f64,
}

/// One simulation per rate, everything else held fixed. With
/// `populations`, row `i` uses `populations[i]` owners instead of
/// `config.total_owners`. Crowd sizes are computed over all owners.
///
/// Owners keep their substreams across rates, so rows differ only through
/// the rate (common random numbers).
pub fn sweep(
    config: &SimulationConfig,
    dataset: &[EpochRecord],
    no_rates: &[f64],
    populations: Option<&[u64]>,
) -> Result<Vec<SweepRow>, SimulationError> {
    if config.variant != Variant::Alp {
        return Err(SimulationError::InvalidConfig(
            "sweeps run the main mechanism only (variant \"alp\")".into(),
        ));
    }
    if let Some(p) = populations {
        if p.len() != no_rates.len() {
            return Err(SimulationError::InvalidConfig(format!(
                "{} populations for {} rates",
                p.len(),
                no_rates.len()
            )));
        }
    }
    let stations = dataset
        .iter()
        .map(|r| r.station_id.as_str())
        .collect::<BTreeSet<_>>()
        .len() as u64;
    let mut out = Vec::with_capacity(no_rates.len());
    for (i, &rate) in no_rates.iter().enumerate() {
        if !(rate > 0.0 && rate <= 1.0) {
            return Err(SimulationError::InvalidConfig(format!(
                "rate {rate} is outside (0, 1]"
            )));
        }
        let mut cfg = config.clone();
        cfg.params = config.params.with_pi_s_no(rate)?;
        if let Some(p) = populations {
            cfg.total_owners = p[i];
        }
        let rows = run_simulation(&cfg, dataset)?;
        let (mut abs, mut rel) = (0.0, 0.0);
        for row in &rows {
            let primary = row.primary().ok_or_else(|| {
                SimulationError::InvalidConfig(format!("no FromYes estimate at rate {rate}"))
            })?;
            abs += primary.abs_error;
            rel += primary.rel_error;
        }
        let n = rows.len().max(1) as f64;
        let crowd = crowd_size(cfg.total_owners, &cfg.params, cfg.confidence)?;
        out.push(SweepRow {
            pi_s_no: rate,
            total_owners: cfg.total_owners,
            mean_abs_err: abs / n,
            mean_rel_err: rel / n,
            epsilon_dp: epsilon_dp(&cfg.params)?.epsilon_dp,
            crowd_expected: crowd.expected_noisy_yes,
            crowd_threshold: crowd.threshold_at_confidence,
            expected_locations: expected_locations(stations.max(1), &cfg.params)?,
        });
    }
    Ok(out)
}

pub fn write_sweep<W: Write>(rows: &[SweepRow], sink: W) -> Result<(), SimulationError> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(SWEEP_HEADER)?;
    for r in rows {
        writer.write_record([
            r.pi_s_no.to_string(),
            r.mean_abs_err.to_string(),
            r.mean_rel_err.to_string(),
            r.epsilon_dp.to_string(),
            r.crowd_expected.to_string(),
            r.crowd_threshold.to_string(),
            r.expected_locations.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}
