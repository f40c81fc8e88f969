//! Reproducible population simulator.
//!
//! Every owner's coin tosses come from a substream addressed by
//! `(owner, epoch, query, slot)`, and tallies are sums, so results do not
//! depend on how the work is split across threads.

mod dataset;
mod oracle;
mod sweep;

pub use dataset::{
    load_dataset, station_name, synth_dataset, write_dataset, EpochRecord, DATASET_HEADER,
};
pub use oracle::{
    convolve_exact, enumerate_exact, monte_carlo_calibration, CalibrationReport,
    EstimatorCalibration, ExactDistribution, MarginalMoments, CONVOLUTION_LIMIT, ENUMERATION_LIMIT,
};
pub use sweep::{sweep, write_sweep, SweepRow, SWEEP_HEADER};

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimation::{
    estimate_all_counts, estimate_cancel_three, estimate_cancel_two, solve_abc_system, Estimate,
    EstimationError, EstimatorKind, MultiTally, PopulationSpec, Tally,
};
use crate::mechanisms::{
    abc_distribution_for, cancellation_distribution, AlgebraCoefficients, CancellationParams,
    LegacyVariant, MechanismParams, MultiDistribution, OutputModel, ParamError, Protocol,
    TrueValue,
};
use crate::privacy::PrivacyError;
use crate::rng::{Slot, StreamKey, Substream};

/// Owners per unit of parallel work.
const OWNER_CHUNK: u64 = 4096;

fn chunks(total: u64) -> impl ParallelIterator<Item = std::ops::Range<u64>> {
    (0..total.div_ceil(OWNER_CHUNK))
        .into_par_iter()
        .map(move |c| c * OWNER_CHUNK..((c + 1) * OWNER_CHUNK).min(total))
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulationError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error(transparent)]
    Privacy(#[from] PrivacyError),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: duplicate record for epoch {epoch}, station {station}")]
    DuplicateKey {
        epoch: u64,
        station: String,
        line: u64,
    },
    #[error("station {0} does not appear in the dataset")]
    UnknownStation(String),
    #[error("no record for the monitored station at epoch {0}")]
    EpochGap(u64),
    #[error("epoch {epoch}: {count} vehicles at the monitored station exceed total_owners = {total_owners}")]
    PopulationTooSmall {
        epoch: u64,
        count: u64,
        total_owners: u64,
    },
    #[error("{owners} owners exceed the limit of {limit} for this mode")]
    TooLarge { owners: u64, limit: u64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("calibration needs at least 100 trials, got {0}")]
    TooFewTrials(u64),
}

impl SimulationError {
    pub fn code(&self) -> &'static str {
        match self {
            SimulationError::Param(e) => e.code(),
            SimulationError::Estimation(e) => e.code(),
            SimulationError::Privacy(e) => e.code(),
            SimulationError::Io(_) => "Io",
            SimulationError::Parse { .. } => "ParseError",
            SimulationError::DuplicateKey { .. } => "DuplicateKey",
            SimulationError::UnknownStation(_) => "UnknownStation",
            SimulationError::EpochGap(_) => "EpochGap",
            SimulationError::PopulationTooSmall { .. } => "PopulationTooSmall",
            SimulationError::TooLarge { .. } => "TooLarge",
            SimulationError::InvalidConfig(_) => "InvalidConfig",
            SimulationError::TooFewTrials(_) => "TooFewTrials",
        }
    }

    pub fn is_io(&self) -> bool {
        matches!(self, SimulationError::Io(_))
    }
}

impl From<csv::Error> for SimulationError {
    fn from(e: csv::Error) -> Self {
        let line = e.position().map_or(0, |p| p.line());
        match e.into_kind() {
            csv::ErrorKind::Io(io) => SimulationError::Io(io.to_string()),
            other => SimulationError::Parse {
                line,
                message: format!("{other:?}"),
            },
        }
    }
}

impl From<std::io::Error> for SimulationError {
    fn from(e: std::io::Error) -> Self {
        SimulationError::Io(e.to_string())
    }
}

/// Which mechanism the owners run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    #[default]
    Alp,
    Legacy(LegacyVariant),
    TwoOutput,
    ThreeOutput,
    Abc,
}

impl Variant {
    pub fn protocol(&self) -> Option<Protocol> {
        match self {
            Variant::TwoOutput => Some(Protocol::TwoOutput),
            Variant::ThreeOutput => Some(Protocol::ThreeOutput),
            Variant::Abc => Some(Protocol::Abc),
            Variant::Alp | Variant::Legacy(_) => None,
        }
    }
}

/// Inclusive epoch range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochRange {
    pub first: u64,
    pub last: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub params: MechanismParams,
    pub master_seed: u64,
    pub confidence: f64,
    pub monitored_station: String,
    pub total_owners: u64,
    /// Defaults to every epoch present in the dataset.
    pub epochs: Option<EpochRange>,
    pub variant: Variant,
    /// Required by the cancellation variants.
    pub cancellation: Option<CancellationParams>,
}

impl SimulationConfig {
    pub fn new(params: MechanismParams, master_seed: u64, total_owners: u64) -> Self {
        Self {
            params,
            master_seed,
            confidence: 0.99,
            monitored_station: station_name(0),
            total_owners,
            epochs: None,
            variant: Variant::Alp,
            cancellation: None,
        }
    }

    pub fn validate(&self) -> Result<(), SimulationError> {
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(EstimationError::InvalidConfidence(self.confidence).into());
        }
        if let Some(range) = self.epochs {
            if range.first > range.last {
                return Err(SimulationError::InvalidConfig(format!(
                    "epoch range {}..={} is empty",
                    range.first, range.last
                )));
            }
        }
        self.sampler().map(|_| ())
    }

    pub(crate) fn sampler(&self) -> Result<Sampler, SimulationError> {
        match self.variant {
            Variant::Alp => Ok(Sampler::Single(self.params.output_model())),
            Variant::Legacy(v) => Ok(Sampler::Single(v.validate()?.output_model())),
            variant => {
                let protocol = variant.protocol().expect("cancellation variant");
                let params = self.cancellation.ok_or_else(|| {
                    SimulationError::InvalidConfig(format!(
                        "variant {variant:?} needs a cancellation block"
                    ))
                })?;
                params.validate(protocol)?;
                let coefficients = AlgebraCoefficients::from_params(&params);
                let empty = MultiDistribution([1.0, 0.0, 0.0]);
                let mut slots = [[empty; 2]; 3];
                for &slot in protocol.slots() {
                    slots[slot.index()] = match protocol {
                        Protocol::Abc => {
                            let (y, n) = abc_distribution_for(&params, &coefficients, slot)?;
                            [y, n]
                        }
                        _ => [
                            cancellation_distribution(&params, protocol, TrueValue::Yes, slot)?,
                            cancellation_distribution(&params, protocol, TrueValue::No, slot)?,
                        ],
                    };
                }
                Ok(Sampler::Multi {
                    protocol,
                    params,
                    slots,
                })
            }
        }
    }
}

/// Resolved per-owner distributions of a configured mechanism.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Sampler {
    Single(OutputModel),
    Multi {
        protocol: Protocol,
        params: CancellationParams,
        /// `[slot][Yes owner, No owner]`
        slots: [[MultiDistribution; 2]; 3],
    },
}

impl Sampler {
    pub(crate) fn run(&self, pop: PopulationSpec, seed: u64, epoch: u64, query: u64) -> EpochTally {
        let total = pop.total();
        let value = |owner: u64| TrueValue::from(owner < pop.yes_count);
        match self {
            Sampler::Single(model) => {
                let tally = chunks(total)
                    .map(|range| {
                        let mut tally = Tally::default();
                        for owner in range {
                            let mut rng =
                                Substream::new(seed, StreamKey::new(owner, epoch, query, Slot::A));
                            tally.record(model.for_value(value(owner)).sample_with(rng.next_f64()));
                        }
                        tally
                    })
                    .reduce(Tally::default, Tally::merge);
                EpochTally::Single(tally)
            }
            Sampler::Multi {
                protocol, slots, ..
            } => {
                let tally = chunks(total)
                    .map(|range| {
                        let mut tally = MultiTally::new(0);
                        for owner in range {
                            let who = match value(owner) {
                                TrueValue::Yes => 0,
                                TrueValue::No => 1,
                            };
                            for &slot in protocol.slots() {
                                let mut rng =
                                    Substream::new(seed, StreamKey::new(owner, epoch, query, slot));
                                tally.record(
                                    slot,
                                    slots[slot.index()][who].sample_with(rng.next_f64()),
                                );
                            }
                        }
                        tally
                    })
                    .reduce(|| MultiTally::new(0), MultiTally::merge);
                EpochTally::Multi(MultiTally { total, ..tally })
            }
        }
    }

    pub(crate) fn estimates(
        &self,
        tally: &EpochTally,
        confidence: f64,
    ) -> Result<Vec<Estimate>, SimulationError> {
        match (self, tally) {
            (Sampler::Single(model), EpochTally::Single(t)) => {
                if t.total() == 0 {
                    return Ok(Vec::new());
                }
                Ok(estimate_all_counts(*t, model, confidence)?)
            }
            (
                Sampler::Multi {
                    protocol, params, ..
                },
                EpochTally::Multi(t),
            ) => {
                if t.total == 0 {
                    return Ok(Vec::new());
                }
                let estimate = match protocol {
                    Protocol::TwoOutput => estimate_cancel_two(*t, params, confidence),
                    Protocol::ThreeOutput => {
                        estimate_cancel_three(*t, params, confidence).map(|e| e.estimate)
                    }
                    Protocol::Abc => solve_abc_system(*t, params, confidence).map(|e| e.estimate),
                };
                match estimate {
                    Ok(e) => Ok(vec![e]),
                    // unidentifiable configurations still produce tallies
                    Err(
                        EstimationError::EqualShiftMasses
                        | EstimationError::ZeroShiftMass
                        | EstimationError::ZeroF21Mass,
                    ) => Ok(Vec::new()),
                    Err(e) => Err(e.into()),
                }
            }
            _ => unreachable!("tally shape always matches its sampler"),
        }
    }
}

/// Observed counts of one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpochTally {
    Single(Tally),
    Multi(MultiTally),
}

impl EpochTally {
    pub fn total(&self) -> u64 {
        match self {
            EpochTally::Single(t) => t.total(),
            EpochTally::Multi(t) => t.total,
        }
    }

    pub fn single(&self) -> Option<Tally> {
        match self {
            EpochTally::Single(t) => Some(*t),
            EpochTally::Multi(_) => None,
        }
    }

    pub fn multi(&self) -> Option<MultiTally> {
        match self {
            EpochTally::Multi(t) => Some(*t),
            EpochTally::Single(_) => None,
        }
    }
}

/// Simulate every owner of `pop` once for query 0 at `epoch`.
pub fn run_epoch(
    pop: PopulationSpec,
    config: &SimulationConfig,
    epoch: u64,
) -> Result<EpochTally, SimulationError> {
    run_epoch_query(pop, config, epoch, 0)
}

/// [`run_epoch`] for one query of a multi-query bit vector. Each query gets
/// its own substreams, so queries are independent.
pub fn run_epoch_query(
    pop: PopulationSpec,
    config: &SimulationConfig,
    epoch: u64,
    query: u64,
) -> Result<EpochTally, SimulationError> {
    let sampler = config.sampler()?;
    Ok(sampler.run(pop, config.master_seed, epoch, query))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateOutcome {
    pub estimate: Estimate,
    pub covered: bool,
    pub abs_error: f64,
    /// `abs_error / max(truth, 1)`
    pub rel_error: f64,
}

impl EstimateOutcome {
    pub fn new(estimate: Estimate, truth: f64) -> Self {
        let abs_error = (estimate.point - truth).abs();
        Self {
            estimate,
            covered: estimate.covers(truth),
            abs_error,
            rel_error: abs_error / truth.max(1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRow {
    pub epoch: u64,
    pub ground_truth_yes: u64,
    pub tally: EpochTally,
    pub estimates: Vec<EstimateOutcome>,
}

impl SimulationRow {
    pub fn get(&self, kind: EstimatorKind) -> Option<&EstimateOutcome> {
        self.estimates.iter().find(|e| e.estimate.estimator == kind)
    }

    /// FromYes for single-response mechanisms, the protocol estimator otherwise.
    pub fn primary(&self) -> Option<&EstimateOutcome> {
        match self.tally {
            EpochTally::Single(_) => self.get(EstimatorKind::FromYes),
            EpochTally::Multi(_) => self.estimates.first(),
        }
    }
}

/// Vehicle counts of the monitored station for every configured epoch.
pub fn monitored_series(
    config: &SimulationConfig,
    dataset: &[EpochRecord],
) -> Result<Vec<(u64, u64)>, SimulationError> {
    let station: BTreeMap<u64, u64> = dataset
        .iter()
        .filter(|r| r.station_id == config.monitored_station)
        .map(|r| (r.epoch, r.vehicle_count))
        .collect();
    if station.is_empty() {
        return Err(SimulationError::UnknownStation(
            config.monitored_station.clone(),
        ));
    }
    let range = match config.epochs {
        Some(r) => r,
        None => {
            let epochs: BTreeSet<u64> = dataset.iter().map(|r| r.epoch).collect();
            EpochRange {
                first: *epochs.first().expect("dataset is not empty"),
                last: *epochs.last().expect("dataset is not empty"),
            }
        }
    };
    (range.first..=range.last)
        .map(|epoch| {
            let count = *station
                .get(&epoch)
                .ok_or(SimulationError::EpochGap(epoch))?;
            if count > config.total_owners {
                return Err(SimulationError::PopulationTooSmall {
                    epoch,
                    count,
                    total_owners: config.total_owners,
                });
            }
            Ok((epoch, count))
        })
        .collect()
}

/// Simulate every configured epoch: the monitored station's vehicles are the
/// Yes population and every other owner is in the No population.
pub fn run_simulation(
    config: &SimulationConfig,
    dataset: &[EpochRecord],
) -> Result<Vec<SimulationRow>, SimulationError> {
    config.validate()?;
    let sampler = config.sampler()?;
    let series = monitored_series(config, dataset)?;
    series
        .par_iter()
        .map(|&(epoch, yes)| {
            let pop = PopulationSpec::new(yes, config.total_owners - yes);
            let tally = sampler.run(pop, config.master_seed, epoch, 0);
            let estimates = sampler
                .estimates(&tally, config.confidence)?
                .into_iter()
                .map(|e| EstimateOutcome::new(e, yes as f64))
                .collect();
            Ok(SimulationRow {
                epoch,
                ground_truth_yes: yes,
                tally,
                estimates,
            })
        })
        .collect()
}

pub const RESULTS_HEADER: [&str; 14] = [
    "epoch",
    "ground_truth",
    "obs_yes",
    "obs_no",
    "obs_bottom",
    "est_from_yes",
    "sigma_from_yes",
    "ci_low",
    "ci_high",
    "covered",
    "est_from_no",
    "est_from_bottom",
    "abs_err",
    "rel_err",
];

pub const MULTI_RESULTS_HEADER: [&str; 19] = [
    "epoch",
    "ground_truth",
    "a_bot1",
    "a_bot2",
    "a_bot3",
    "b_bot1",
    "b_bot2",
    "b_bot3",
    "c_bot1",
    "c_bot2",
    "c_bot3",
    "estimator",
    "estimate",
    "sigma",
    "ci_low",
    "ci_high",
    "covered",
    "abs_err",
    "rel_err",
];

fn num(x: f64) -> String {
    format!("{x}")
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Write simulation rows as CSV. Single-response rows use
/// [`RESULTS_HEADER`]; cancellation rows use [`MULTI_RESULTS_HEADER`].
pub fn write_results<W: Write>(rows: &[SimulationRow], sink: W) -> Result<(), SimulationError> {
    let mut writer = csv::Writer::from_writer(sink);
    let multi = rows
        .first()
        .is_some_and(|r| matches!(r.tally, EpochTally::Multi(_)));
    if multi {
        writer.write_record(MULTI_RESULTS_HEADER)?;
    } else {
        writer.write_record(RESULTS_HEADER)?;
    }
    for row in rows {
        let primary = row.primary();
        let mut record = vec![row.epoch.to_string(), row.ground_truth_yes.to_string()];
        match row.tally {
            EpochTally::Single(t) => {
                let point = |k| row.get(k).map(|o| o.estimate.point);
                record.extend([t.yes.to_string(), t.no.to_string(), t.bottom.to_string()]);
                record.extend([
                    opt_num(primary.map(|o| o.estimate.point)),
                    opt_num(primary.map(|o| o.estimate.sigma)),
                    opt_num(primary.map(|o| o.estimate.ci_low)),
                    opt_num(primary.map(|o| o.estimate.ci_high)),
                    primary.map(|o| o.covered.to_string()).unwrap_or_default(),
                    opt_num(point(EstimatorKind::FromNo)),
                    opt_num(point(EstimatorKind::FromBottom)),
                ]);
            }
            EpochTally::Multi(t) => {
                record.extend(t.slots.iter().flatten().map(u64::to_string));
                record.extend([
                    primary
                        .map(|o| {
                            serde_json::to_value(o.estimate.estimator).expect("enum serializes")
                        })
                        .and_then(|v| v.as_str().map(str::to_owned))
                        .unwrap_or_default(),
                    opt_num(primary.map(|o| o.estimate.point)),
                    opt_num(primary.map(|o| o.estimate.sigma)),
                    opt_num(primary.map(|o| o.estimate.ci_low)),
                    opt_num(primary.map(|o| o.estimate.ci_high)),
                    primary.map(|o| o.covered.to_string()).unwrap_or_default(),
                ]);
            }
        }
        record.push(opt_num(primary.map(|o| o.abs_error)));
        record.push(opt_num(primary.map(|o| o.rel_error)));
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Run `f` on a dedicated pool of `threads` workers (0 = rayon's default).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}
