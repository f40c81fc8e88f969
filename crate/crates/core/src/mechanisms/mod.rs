//! Per-data-owner randomizers.
//!
//! Every mechanism maps an owner's true answer to a categorical distribution
//! over responses; [`privatize`] draws one response from it. Distributions
//! are computed once per (params, population) and reused for every owner.

mod cancellation;
mod legacy;

pub use cancellation::{
    abc_distribution, abc_distribution_for, cancellation_distribution, AlgebraCoefficients,
    CancellationParams, MultiDistribution, MultiResponse, Protocol,
};
pub use legacy::LegacyVariant;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::uniform01;

/// Tolerance used when a set of probabilities has to sum to one.
pub(crate) const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("{field} = {value} is outside [0, 1]")]
    OutOfRange { field: &'static str, value: f64 },
    #[error("pi_s_yes1 + pi_s_yes2 = {sum} exceeds 1")]
    InfeasibleYesSplit { sum: f64 },
    #[error("invalid protocol parameters: {0}")]
    InvalidProtocolParams(String),
    #[error("slot {0:?} is not defined for this protocol")]
    InvalidSlot(crate::rng::Slot),
}

impl ParamError {
    pub fn code(&self) -> &'static str {
        match self {
            ParamError::OutOfRange { .. } => "OutOfRange",
            ParamError::InfeasibleYesSplit { .. } => "InfeasibleYesSplit",
            ParamError::InvalidProtocolParams(_) => "InvalidProtocolParams",
            ParamError::InvalidSlot(_) => "InvalidSlot",
        }
    }
}

pub(crate) fn check_probability(field: &'static str, value: f64) -> Result<f64, ParamError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(ParamError::OutOfRange { field, value })
    }
}

/// The owner's ground-truth answer to one query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrueValue {
    Yes,
    No,
}

impl From<bool> for TrueValue {
    fn from(bit: bool) -> Self {
        if bit {
            TrueValue::Yes
        } else {
            TrueValue::No
        }
    }
}

/// A privatized response. `Bottom` is the explicit "not participating" output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Response {
    Yes,
    No,
    Bottom,
}

impl Response {
    pub fn as_str(self) -> &'static str {
        match self {
            Response::Yes => "yes",
            Response::No => "no",
            Response::Bottom => "bottom",
        }
    }
}

/// Categorical distribution over `{Yes, No, Bottom}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseDistribution {
    pub yes: f64,
    pub no: f64,
    pub bottom: f64,
}

impl ResponseDistribution {
    pub const fn new(yes: f64, no: f64, bottom: f64) -> Self {
        Self { yes, no, bottom }
    }

    /// Probability of one particular response.
    pub fn probability(&self, response: Response) -> f64 {
        match response {
            Response::Yes => self.yes,
            Response::No => self.no,
            Response::Bottom => self.bottom,
        }
    }

    /// Probability of participating (anything but `Bottom`).
    pub fn sampling_mass(&self) -> f64 {
        self.yes + self.no
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.yes, self.no, self.bottom]
    }

    /// Inverse-CDF draw from a single uniform. Outcomes are ordered
    /// Yes, No, Bottom, so a smaller `yes` mass selects a subset of the
    /// uniforms a larger one would.
    #[inline]
    pub fn sample_with(&self, u: f64) -> Response {
        if u < self.yes {
            Response::Yes
        } else if u < self.yes + self.no {
            Response::No
        } else {
            Response::Bottom
        }
    }
}

/// Response distributions of both populations for one mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutputModel {
    pub yes_population: ResponseDistribution,
    pub no_population: ResponseDistribution,
}

impl OutputModel {
    pub fn for_value(&self, value: TrueValue) -> &ResponseDistribution {
        match value {
            TrueValue::Yes => &self.yes_population,
            TrueValue::No => &self.no_population,
        }
    }

    /// `(p_yes_pop, p_no_pop)`: probability of emitting `response` in each population.
    pub fn coefficients(&self, response: Response) -> (f64, f64) {
        (
            self.yes_population.probability(response),
            self.no_population.probability(response),
        )
    }
}

/// Unvalidated parameter set, as it appears in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawMechanismParams {
    pub pi_s_yes1: f64,
    pub pi_s_yes2: f64,
    pub pi_s_no: f64,
    pub pi_1: f64,
    pub pi_2: f64,
    pub pi_3: f64,
}

/// Validated parameters of the main mechanism.
///
/// A Yes-population owner is sampled into one of two branches (rates
/// `pi_s_yes1`, `pi_s_yes2`) and answers "Yes" with the branch's coin
/// (`pi_1`, `pi_2`); otherwise it answers Bottom. A No-population owner is
/// sampled with `pi_s_no` and then answers "Yes" with probability `pi_3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMechanismParams", into = "RawMechanismParams")]
pub struct MechanismParams {
    pi_s_yes1: f64,
    pi_s_yes2: f64,
    pi_s_no: f64,
    pi_1: f64,
    pi_2: f64,
    pi_3: f64,
}

/// Check every invariant of a raw parameter set.
pub fn validate_params(raw: RawMechanismParams) -> Result<MechanismParams, ParamError> {
    let pi_s_yes1 = check_probability("pi_s_yes1", raw.pi_s_yes1)?;
    let pi_s_yes2 = check_probability("pi_s_yes2", raw.pi_s_yes2)?;
    let pi_s_no = check_probability("pi_s_no", raw.pi_s_no)?;
    let pi_1 = check_probability("pi_1", raw.pi_1)?;
    let pi_2 = check_probability("pi_2", raw.pi_2)?;
    let pi_3 = check_probability("pi_3", raw.pi_3)?;
    let sum = pi_s_yes1 + pi_s_yes2;
    if sum > 1.0 + 1e-12 {
        return Err(ParamError::InfeasibleYesSplit { sum });
    }
    Ok(MechanismParams {
        pi_s_yes1,
        pi_s_yes2,
        pi_s_no,
        pi_1,
        pi_2,
        pi_3,
    })
}

impl TryFrom<RawMechanismParams> for MechanismParams {
    type Error = ParamError;

    fn try_from(raw: RawMechanismParams) -> Result<Self, Self::Error> {
        validate_params(raw)
    }
}

impl From<MechanismParams> for RawMechanismParams {
    fn from(p: MechanismParams) -> Self {
        RawMechanismParams {
            pi_s_yes1: p.pi_s_yes1,
            pi_s_yes2: p.pi_s_yes2,
            pi_s_no: p.pi_s_no,
            pi_1: p.pi_1,
            pi_2: p.pi_2,
            pi_3: p.pi_3,
        }
    }
}

impl MechanismParams {
    /// Parameters in field order `(pi_s_yes1, pi_s_yes2, pi_s_no, pi_1, pi_2, pi_3)`.
    pub fn new(
        pi_s_yes1: f64,
        pi_s_yes2: f64,
        pi_s_no: f64,
        pi_1: f64,
        pi_2: f64,
        pi_3: f64,
    ) -> Result<Self, ParamError> {
        validate_params(RawMechanismParams {
            pi_s_yes1,
            pi_s_yes2,
            pi_s_no,
            pi_1,
            pi_2,
            pi_3,
        })
    }

    /// The evaluation setting: (0.45, 0.50, 0.068, 0.95, 0.98, 0.98).
    pub fn reference() -> Self {
        Self::new(0.45, 0.50, 0.068, 0.95, 0.98, 0.98).expect("reference parameters are valid")
    }

    pub fn pi_s_yes1(&self) -> f64 {
        self.pi_s_yes1
    }
    pub fn pi_s_yes2(&self) -> f64 {
        self.pi_s_yes2
    }
    pub fn pi_s_no(&self) -> f64 {
        self.pi_s_no
    }
    pub fn pi_1(&self) -> f64 {
        self.pi_1
    }
    pub fn pi_2(&self) -> f64 {
        self.pi_2
    }
    pub fn pi_3(&self) -> f64 {
        self.pi_3
    }

    /// Copy with a different No-population sampling rate.
    pub fn with_pi_s_no(&self, pi_s_no: f64) -> Result<Self, ParamError> {
        let mut raw = RawMechanismParams::from(*self);
        raw.pi_s_no = pi_s_no;
        validate_params(raw)
    }

    /// Fields in declaration order; used for deterministic tie-breaking.
    pub fn as_array(&self) -> [f64; 6] {
        [
            self.pi_s_yes1,
            self.pi_s_yes2,
            self.pi_s_no,
            self.pi_1,
            self.pi_2,
            self.pi_3,
        ]
    }

    pub fn response_distribution(&self, population: TrueValue) -> ResponseDistribution {
        response_distribution(self, population)
    }

    pub fn output_model(&self) -> OutputModel {
        OutputModel {
            yes_population: response_distribution(self, TrueValue::Yes),
            no_population: response_distribution(self, TrueValue::No),
        }
    }

    /// Draw one privatized response for an owner holding `value`.
    pub fn privatize<R: RngCore + ?Sized>(&self, value: TrueValue, rng: &mut R) -> Response {
        privatize(&self.response_distribution(value), rng)
    }
}

/// Output distribution of the main mechanism for one population.
pub fn response_distribution(
    params: &MechanismParams,
    population: TrueValue,
) -> ResponseDistribution {
    match population {
        TrueValue::Yes => {
            let sampled = params.pi_s_yes1 + params.pi_s_yes2;
            ResponseDistribution {
                yes: params.pi_s_yes1 * params.pi_1 + params.pi_s_yes2 * params.pi_2,
                no: params.pi_s_yes1 * (1.0 - params.pi_1) + params.pi_s_yes2 * (1.0 - params.pi_2),
                bottom: (1.0 - sampled).max(0.0),
            }
        }
        TrueValue::No => ResponseDistribution {
            yes: params.pi_s_no * params.pi_3,
            no: params.pi_s_no * (1.0 - params.pi_3),
            bottom: 1.0 - params.pi_s_no,
        },
    }
}

/// One draw from `distribution`.
#[inline]
pub fn privatize<R: RngCore + ?Sized>(
    distribution: &ResponseDistribution,
    rng: &mut R,
) -> Response {
    distribution.sample_with(uniform01(rng))
}

/// Privatize every bit of an owner's query vector. Bit `true` uses the
/// Yes-population distribution; each query is an independent draw.
pub fn privatize_bitvector<R: RngCore + ?Sized>(
    bits: &[bool],
    params: &MechanismParams,
    rng: &mut R,
) -> Vec<Response> {
    let model = params.output_model();
    bits.iter()
        .map(|&bit| privatize(model.for_value(TrueValue::from(bit)), rng))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Substream;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn validation_examples() {
        assert!(MechanismParams::new(0.45, 0.50, 0.068, 0.95, 0.98, 0.98).is_ok());
        assert!(MechanismParams::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0).is_ok());
        assert!(matches!(
            MechanismParams::new(0.6, 0.6, 0.1, 0.5, 0.5, 0.5),
            Err(ParamError::InfeasibleYesSplit { .. })
        ));
        assert!(matches!(
            MechanismParams::new(0.1, 0.1, 1.5, 0.5, 0.5, 0.5),
            Err(ParamError::OutOfRange {
                field: "pi_s_no",
                ..
            })
        ));
        assert!(matches!(
            MechanismParams::new(0.1, 0.1, 0.1, f64::NAN, 0.5, 0.5),
            Err(ParamError::OutOfRange { field: "pi_1", .. })
        ));
    }

    #[test]
    fn reference_distributions() {
        let p = MechanismParams::reference();
        let yes = p.response_distribution(TrueValue::Yes);
        assert!(close(yes.yes, 0.9175, 1e-12));
        assert!(close(yes.no, 0.0325, 1e-12));
        assert!(close(yes.bottom, 0.05, 1e-12));
        let no = p.response_distribution(TrueValue::No);
        assert!(close(no.yes, 0.06664, 1e-12));
        assert!(close(no.no, 0.00136, 1e-12));
        assert!(close(no.bottom, 0.932, 1e-12));
    }

    #[test]
    fn truthful_point_mass() {
        let p = MechanismParams::new(1.0, 0.0, 0.0, 1.0, 0.0, 0.0).unwrap();
        assert_eq!(
            p.response_distribution(TrueValue::Yes),
            ResponseDistribution::new(1.0, 0.0, 0.0)
        );
        let mut rng = Substream::from_raw(9);
        for _ in 0..100 {
            assert_eq!(p.privatize(TrueValue::Yes, &mut rng), Response::Yes);
            assert_eq!(p.privatize(TrueValue::No, &mut rng), Response::Bottom);
        }
    }

    #[test]
    fn point_masses_ignore_the_stream() {
        let mut rng = Substream::from_raw(123);
        for _ in 0..1000 {
            assert_eq!(
                privatize(&ResponseDistribution::new(1.0, 0.0, 0.0), &mut rng),
                Response::Yes
            );
            assert_eq!(
                privatize(&ResponseDistribution::new(0.0, 0.0, 1.0), &mut rng),
                Response::Bottom
            );
        }
    }

    #[test]
    fn bitvector_examples() {
        let truthful = MechanismParams::new(1.0, 0.0, 0.0, 1.0, 0.0, 0.0).unwrap();
        let mut rng = Substream::from_raw(5);
        assert_eq!(
            privatize_bitvector(&[true], &truthful, &mut rng),
            vec![Response::Yes]
        );
        assert_eq!(
            privatize_bitvector(&[false, false, false], &truthful, &mut rng),
            vec![Response::Bottom; 3]
        );
    }

    #[test]
    fn privatize_is_reproducible() {
        let p = MechanismParams::reference();
        let draws = |seed| {
            let mut rng = Substream::from_raw(seed);
            (0..64)
                .map(|_| p.privatize(TrueValue::No, &mut rng))
                .collect::<Vec<_>>()
        };
        assert_eq!(draws(77), draws(77));
    }

    #[test]
    fn serde_rejects_invalid() {
        let bad =
            r#"{"pi_s_yes1":0.6,"pi_s_yes2":0.6,"pi_s_no":0.1,"pi_1":0.5,"pi_2":0.5,"pi_3":0.5}"#;
        assert!(serde_json::from_str::<MechanismParams>(bad).is_err());
        let good = serde_json::to_string(&MechanismParams::reference()).unwrap();
        let back: MechanismParams = serde_json::from_str(&good).unwrap();
        assert_eq!(back, MechanismParams::reference());
    }
}
