//! `alp` command-line front end.
//!
//! Exit status: 0 on success, 1 on usage or validation errors, 2 on I/O
//! errors. Failures print one line, `ERROR <code>: <message>`, on stderr.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimation::{
    estimate_all_counts, min_variance_search, solve_two_unknowns, EstimationError, ParamGrid,
    PopulationSpec, Tally,
};
use crate::mechanisms::{
    validate_params, CancellationParams, MechanismParams, ParamError, RawMechanismParams, TrueValue,
};
use crate::privacy::{crowd_size, epsilon_dp, expected_locations, PrivacyError};
use crate::rng::{Slot, StreamKey, Substream};
use crate::simulation::{
    load_dataset, monte_carlo_calibration, run_simulation, station_name, sweep, synth_dataset,
    with_threads, write_dataset, write_results, write_sweep, EpochRange, SimulationConfig,
    SimulationError, Variant,
};

pub const THREADS_ENV: &str = "ALP_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error(transparent)]
    Privacy(#[from] PrivacyError),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "UsageError",
            CliError::Io { .. } => "IoError",
            CliError::Config(_) => "ConfigError",
            CliError::Param(e) => e.code(),
            CliError::Estimation(e) => e.code(),
            CliError::Privacy(e) => e.code(),
            CliError::Simulation(e) => e.code(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 2,
            CliError::Simulation(e) if e.is_io() => 2,
            _ => 1,
        }
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn default_confidence() -> f64 {
    0.99
}

/// JSON configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    pub pi_s_yes1: f64,
    pub pi_s_yes2: f64,
    pub pi_s_no: f64,
    pub pi_1: f64,
    pub pi_2: f64,
    pub pi_3: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    #[serde(default)]
    pub total_owners: Option<u64>,
    #[serde(default)]
    pub monitored_station: Option<String>,
    #[serde(default)]
    pub variant: Variant,
    #[serde(default)]
    pub cancellation: Option<CancellationParams>,
    #[serde(default)]
    pub epochs: Option<EpochRange>,
}

impl CliConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn params(&self) -> Result<MechanismParams, CliError> {
        Ok(validate_params(RawMechanismParams {
            pi_s_yes1: self.pi_s_yes1,
            pi_s_yes2: self.pi_s_yes2,
            pi_s_no: self.pi_s_no,
            pi_1: self.pi_1,
            pi_2: self.pi_2,
            pi_3: self.pi_3,
        })?)
    }

    fn confidence(&self) -> Result<f64, CliError> {
        if self.confidence > 0.0 && self.confidence < 1.0 {
            Ok(self.confidence)
        } else {
            Err(EstimationError::InvalidConfidence(self.confidence).into())
        }
    }

    pub fn simulation(&self, seed: Option<u64>) -> Result<SimulationConfig, CliError> {
        let total_owners = self
            .total_owners
            .ok_or_else(|| CliError::Config("total_owners is required".into()))?;
        let mut config =
            SimulationConfig::new(self.params()?, seed.unwrap_or(self.seed), total_owners);
        config.confidence = self.confidence()?;
        config.monitored_station = self
            .monitored_station
            .clone()
            .unwrap_or_else(|| station_name(0));
        config.variant = self.variant;
        config.cancellation = self.cancellation;
        config.epochs = self.epochs;
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Parser)]
#[command(name = "alp", version, about = "Anonymized local privacy toolkit")]
struct Cli {
    /// Master seed; overrides the config file's `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ValueArg {
    Yes,
    No,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the ε report of a parameter set as JSON.
    Epsilon {
        #[arg(long)]
        config: PathBuf,
    },
    /// Privatize one true value for `count` owners, one response per line.
    Privatize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        value: ValueArg,
        #[arg(long, default_value_t = 1)]
        count: u64,
    },
    /// Estimate YES from an observed tally.
    Estimate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        yes: u64,
        #[arg(long)]
        no: u64,
        #[arg(long)]
        bottom: u64,
    },
    /// Simulate every epoch of a dataset and write the results CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Repeat the simulation over several No-population sampling rates.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        rates: Vec<f64>,
        /// One total population per rate.
        #[arg(long, value_delimiter = ',')]
        populations: Option<Vec<u64>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Crowd of No-population owners answering "Yes".
    Crowd {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        population: u64,
    },
    /// Expected number of locations an owner claims.
    Locations {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        stations: u64,
    },
    /// Minimal-variance parameter search over a JSON grid.
    Tune {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        population_yes: u64,
        #[arg(long)]
        population_no: u64,
        #[arg(long, allow_negative_numbers = true)]
        epsilon_max: Option<f64>,
    },
    /// Monte Carlo calibration of the count estimators.
    Calibrate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        population_yes: u64,
        #[arg(long)]
        population_no: u64,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
    },
    /// Write a synthetic station-count dataset.
    Synth {
        #[arg(long)]
        stations: u64,
        #[arg(long)]
        epochs: u64,
        #[arg(long)]
        vehicles: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parse `args` (including the program name), run, and return the exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let message = e.to_string();
            let first = message
                .lines()
                .next()
                .unwrap_or("")
                .trim_start_matches("error: ");
            let _ = writeln!(stderr, "ERROR UsageError: {first}");
            return 1;
        }
    };
    let threads = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0);
    let outcome = with_threads(threads, || dispatch(cli));
    match outcome {
        Ok(text) => {
            if stdout.write_all(text.as_bytes()).is_err() {
                return 2;
            }
            0
        }
        Err(e) => {
            let message = e.to_string().replace('\n', " ");
            let _ = writeln!(stderr, "ERROR {}: {message}", e.code());
            e.exit_code()
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    text
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| io_error(path, e))
}

fn read_dataset(path: &Path) -> Result<Vec<crate::simulation::EpochRecord>, CliError> {
    let file = fs::File::open(path).map_err(|e| io_error(path, e))?;
    Ok(load_dataset(std::io::BufReader::new(file))?)
}

#[derive(Serialize)]
struct EstimateReport {
    estimates: Vec<crate::estimation::Estimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    solver_candidates: Option<Vec<crate::estimation::SolverCandidate>>,
}

fn dispatch(cli: Cli) -> Result<String, CliError> {
    let seed = cli.seed;
    match cli.command {
        Command::Epsilon { config } => {
            let params = CliConfig::load(&config)?.params()?;
            Ok(to_json(&epsilon_dp(&params)?))
        }
        Command::Privatize {
            config,
            value,
            count,
        } => {
            let cfg = CliConfig::load(&config)?;
            let sim = SimulationConfig {
                total_owners: count,
                ..cfg.simulation_like(seed)?
            };
            let truth = match value {
                ValueArg::Yes => TrueValue::Yes,
                ValueArg::No => TrueValue::No,
            };
            let mut out = String::new();
            match sim.variant {
                Variant::Alp | Variant::Legacy(_) => {
                    let model = match sim.variant {
                        Variant::Legacy(v) => v.validate()?.output_model(),
                        _ => sim.params.output_model(),
                    };
                    let dist = model.for_value(truth);
                    for owner in 0..count {
                        let mut rng =
                            Substream::new(sim.master_seed, StreamKey::new(owner, 0, 0, Slot::A));
                        out.push_str(dist.sample_with(rng.next_f64()).as_str());
                        out.push('\n');
                    }
                }
                variant => {
                    let protocol = variant.protocol().expect("cancellation variant");
                    let params = sim
                        .cancellation
                        .ok_or_else(|| CliError::Config("cancellation block is required".into()))?;
                    let coefficients = crate::mechanisms::AlgebraCoefficients::from_params(&params);
                    for owner in 0..count {
                        let mut fields = Vec::new();
                        for &slot in protocol.slots() {
                            let dist = match protocol {
                                crate::mechanisms::Protocol::Abc => {
                                    crate::mechanisms::abc_distribution(
                                        &params,
                                        &coefficients,
                                        truth,
                                        slot,
                                    )?
                                }
                                _ => crate::mechanisms::cancellation_distribution(
                                    &params, protocol, truth, slot,
                                )?,
                            };
                            let mut rng =
                                Substream::new(sim.master_seed, StreamKey::new(owner, 0, 0, slot));
                            fields.push(dist.sample_with(rng.next_f64()).as_str());
                        }
                        out.push_str(&fields.join(","));
                        out.push('\n');
                    }
                }
            }
            Ok(out)
        }
        Command::Estimate {
            config,
            yes,
            no,
            bottom,
        } => {
            let cfg = CliConfig::load(&config)?;
            let params = cfg.params()?;
            let confidence = cfg.confidence()?;
            let tally = Tally::new(yes, no, bottom);
            if tally.total() == 0 {
                return Err(EstimationError::DegenerateTally.into());
            }
            let model = match cfg.variant {
                Variant::Legacy(v) => v.validate()?.output_model(),
                Variant::Alp => params.output_model(),
                _ => {
                    return Err(CliError::Usage(
                        "estimate takes a single-response tally; cancellation variants are estimated by simulate".into(),
                    ))
                }
            };
            let estimates = estimate_all_counts(tally, &model, confidence)?;
            let unit_coins = params.pi_1() == 1.0 && params.pi_2() == 1.0 && params.pi_3() == 1.0;
            let solver_candidates = if cfg.variant == Variant::Alp && unit_coins {
                solve_two_unknowns(tally, &params).ok()
            } else {
                None
            };
            Ok(to_json(&EstimateReport {
                estimates,
                solver_candidates,
            }))
        }
        Command::Simulate {
            config,
            dataset,
            out,
        } => {
            let sim = CliConfig::load(&config)?.simulation(seed)?;
            let data = read_dataset(&dataset)?;
            let rows = run_simulation(&sim, &data)?;
            let mut buf = Vec::new();
            write_results(&rows, &mut buf)?;
            write_file(&out, &buf)?;
            Ok(String::new())
        }
        Command::Sweep {
            config,
            dataset,
            rates,
            populations,
            out,
        } => {
            let sim = CliConfig::load(&config)?.simulation(seed)?;
            let data = read_dataset(&dataset)?;
            let rows = sweep(&sim, &data, &rates, populations.as_deref())?;
            let mut buf = Vec::new();
            write_sweep(&rows, &mut buf)?;
            write_file(&out, &buf)?;
            Ok(String::new())
        }
        Command::Crowd { config, population } => {
            let cfg = CliConfig::load(&config)?;
            Ok(to_json(&crowd_size(
                population,
                &cfg.params()?,
                cfg.confidence()?,
            )?))
        }
        Command::Locations { config, stations } => {
            let params = CliConfig::load(&config)?.params()?;
            Ok(to_json(&serde_json::json!({
                "num_locations": stations,
                "expected_locations": expected_locations(stations, &params)?,
            })))
        }
        Command::Tune {
            grid,
            population_yes,
            population_no,
            epsilon_max,
        } => {
            let text = fs::read_to_string(&grid).map_err(|e| io_error(&grid, e))?;
            let grid: ParamGrid = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", grid.display())))?;
            let points = grid.points();
            let best = min_variance_search(
                &points,
                PopulationSpec::new(population_yes, population_no),
                epsilon_max,
            )?;
            Ok(to_json(&best))
        }
        Command::Calibrate {
            config,
            population_yes,
            population_no,
            trials,
        } => {
            let cfg = CliConfig::load(&config)?;
            let report = monte_carlo_calibration(
                &cfg.params()?,
                PopulationSpec::new(population_yes, population_no),
                trials,
                cfg.confidence()?,
                seed.unwrap_or(cfg.seed),
            )?;
            Ok(to_json(&report))
        }
        Command::Synth {
            stations,
            epochs,
            vehicles,
            out,
        } => {
            if stations == 0 {
                return Err(CliError::Usage("--stations must be at least 1".into()));
            }
            let records = synth_dataset(stations, epochs, vehicles, seed.unwrap_or(0));
            let mut buf = Vec::new();
            write_dataset(&records, &mut buf)?;
            write_file(&out, &buf)?;
            Ok(String::new())
        }
    }
}

impl CliConfig {
    /// Simulation settings for commands that do not need `total_owners`.
    fn simulation_like(&self, seed: Option<u64>) -> Result<SimulationConfig, CliError> {
        let mut cfg = self.clone();
        cfg.total_owners.get_or_insert(0);
        cfg.simulation(seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(
            std::iter::once("alp").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn unknown_subcommand_is_usage_error() {
        let (code, _, err) = run_args(&["frobnicate"]);
        assert_eq!(code, 1);
        assert!(err.starts_with("ERROR UsageError: "), "{err}");
        assert_eq!(err.lines().count(), 1);
    }

    #[test]
    fn missing_config_is_io_error() {
        let (code, _, err) = run_args(&["epsilon", "--config", "/nonexistent/alp.json"]);
        assert_eq!(code, 2);
        assert!(err.starts_with("ERROR IoError: "), "{err}");
    }

    #[test]
    fn help_succeeds() {
        let (code, out, _) = run_args(&["--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("simulate"));
    }
}
