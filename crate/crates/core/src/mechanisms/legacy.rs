use serde::{Deserialize, Serialize};

use super::{check_probability, OutputModel, ParamError, ResponseDistribution, TrueValue};

/// The simpler mechanisms the main one is built up from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LegacyVariant {
    /// Sampled owners answer truthfully; everyone else answers Bottom.
    SamplingOnly { pi_s: f64 },
    /// Yes owners answer truthfully when sampled; sampled No owners answer
    /// "Yes" with probability `noise_yes_fraction`.
    SamplingAndNoise {
        pi_s_yes: f64,
        pi_s_no: f64,
        noise_yes_fraction: f64,
    },
    /// Sampled owners answer truthfully with probability `pi_1`, otherwise
    /// they are forced to "Yes" with probability `pi_2`.
    PlausibleDeniability {
        pi_s_yes: f64,
        pi_s_no: f64,
        pi_1: f64,
        pi_2: f64,
    },
}

impl LegacyVariant {
    pub fn validate(self) -> Result<Self, ParamError> {
        match self {
            LegacyVariant::SamplingOnly { pi_s } => {
                check_probability("pi_s", pi_s)?;
            }
            LegacyVariant::SamplingAndNoise {
                pi_s_yes,
                pi_s_no,
                noise_yes_fraction,
            } => {
                check_probability("pi_s_yes", pi_s_yes)?;
                check_probability("pi_s_no", pi_s_no)?;
                check_probability("noise_yes_fraction", noise_yes_fraction)?;
            }
            LegacyVariant::PlausibleDeniability {
                pi_s_yes,
                pi_s_no,
                pi_1,
                pi_2,
            } => {
                check_probability("pi_s_yes", pi_s_yes)?;
                check_probability("pi_s_no", pi_s_no)?;
                check_probability("pi_1", pi_1)?;
                check_probability("pi_2", pi_2)?;
            }
        }
        Ok(self)
    }

    pub fn distribution(&self, population: TrueValue) -> ResponseDistribution {
        legacy_distribution(self, population)
    }

    pub fn output_model(&self) -> OutputModel {
        OutputModel {
            yes_population: legacy_distribution(self, TrueValue::Yes),
            no_population: legacy_distribution(self, TrueValue::No),
        }
    }
}

/// Output distribution of a legacy mechanism. Expects a validated variant.
pub fn legacy_distribution(variant: &LegacyVariant, population: TrueValue) -> ResponseDistribution {
    match (*variant, population) {
        (LegacyVariant::SamplingOnly { pi_s }, TrueValue::Yes) => {
            ResponseDistribution::new(pi_s, 0.0, 1.0 - pi_s)
        }
        (LegacyVariant::SamplingOnly { pi_s }, TrueValue::No) => {
            ResponseDistribution::new(0.0, pi_s, 1.0 - pi_s)
        }
        (LegacyVariant::SamplingAndNoise { pi_s_yes, .. }, TrueValue::Yes) => {
            ResponseDistribution::new(pi_s_yes, 0.0, 1.0 - pi_s_yes)
        }
        (
            LegacyVariant::SamplingAndNoise {
                pi_s_no,
                noise_yes_fraction,
                ..
            },
            TrueValue::No,
        ) => ResponseDistribution::new(
            pi_s_no * noise_yes_fraction,
            pi_s_no * (1.0 - noise_yes_fraction),
            1.0 - pi_s_no,
        ),
        (
            LegacyVariant::PlausibleDeniability {
                pi_s_yes,
                pi_1,
                pi_2,
                ..
            },
            TrueValue::Yes,
        ) => {
            let yes = pi_s_yes * (pi_1 + (1.0 - pi_1) * pi_2);
            ResponseDistribution::new(yes, pi_s_yes - yes, 1.0 - pi_s_yes)
        }
        (
            LegacyVariant::PlausibleDeniability {
                pi_s_no,
                pi_1,
                pi_2,
                ..
            },
            TrueValue::No,
        ) => {
            let yes = pi_s_no * (1.0 - pi_1) * pi_2;
            ResponseDistribution::new(yes, pi_s_no - yes, 1.0 - pi_s_no)
        }
    }
}
