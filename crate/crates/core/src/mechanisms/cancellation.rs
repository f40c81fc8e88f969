//! Dual/triple-response noise-cancellation protocols.
//!
//! Every owner answers the same query once per slot (A, B and, for the
//! A/B/C protocol, C). All answers fall into the three non-participation
//! buckets ⊥1, ⊥2, ⊥3; the slots differ only in where a small "shift" mass
//! is placed, so that differences of slot counts isolate the Yes population.
//!
//! The three-output case distributions are built so that each slot's
//! expected counts are exactly
//!
//! ```text
//! E[⊥1A] = π⊥1·TOTAL + πY·YES      E[⊥1B] = π⊥1·TOTAL
//! E[⊥2A] = π⊥2·TOTAL + πN·NO       E[⊥2B] = π⊥2·TOTAL
//! E[⊥3A] = π⊥3·TOTAL               E[⊥3B] = π⊥3·TOTAL + πY·YES + πN·NO
//! ```
//!
//! which requires a single shift mass (πY = πN) and π⊥1+π⊥2+π⊥3+πY = 1.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{check_probability, ParamError, TrueValue, SUM_TOLERANCE};
use crate::rng::{uniform01, Slot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    TwoOutput,
    ThreeOutput,
    Abc,
}

impl Protocol {
    pub fn slots(self) -> &'static [Slot] {
        match self {
            Protocol::TwoOutput | Protocol::ThreeOutput => &[Slot::A, Slot::B],
            Protocol::Abc => &[Slot::A, Slot::B, Slot::C],
        }
    }
}

/// One of the three outputs ⊥1, ⊥2, ⊥3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MultiResponse {
    Bottom1,
    Bottom2,
    Bottom3,
}

impl MultiResponse {
    pub const fn index(self) -> usize {
        match self {
            MultiResponse::Bottom1 => 0,
            MultiResponse::Bottom2 => 1,
            MultiResponse::Bottom3 => 2,
        }
    }

    pub const fn as_str(self) -> &'static str {
        match self {
            MultiResponse::Bottom1 => "Bottom1",
            MultiResponse::Bottom2 => "Bottom2",
            MultiResponse::Bottom3 => "Bottom3",
        }
    }
}

/// Categorical distribution over `(⊥1, ⊥2, ⊥3)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiDistribution(pub [f64; 3]);

impl MultiDistribution {
    #[inline]
    pub fn sample_with(&self, u: f64) -> MultiResponse {
        let [p1, p2, _] = self.0;
        if u < p1 {
            MultiResponse::Bottom1
        } else if u < p1 + p2 {
            MultiResponse::Bottom2
        } else {
            MultiResponse::Bottom3
        }
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> MultiResponse {
        self.sample_with(uniform01(rng))
    }

    fn check(self, label: &str) -> Result<Self, ParamError> {
        let tol = 1e-12;
        if let Some(p) = self.0.iter().find(|p| !(-tol..=1.0 + tol).contains(*p)) {
            return Err(ParamError::InvalidProtocolParams(format!(
                "{label}: case probability {p} leaves [0, 1]"
            )));
        }
        let sum: f64 = self.0.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(ParamError::InvalidProtocolParams(format!(
                "{label}: case probabilities sum to {sum}"
            )));
        }
        Ok(MultiDistribution(self.0.map(|p| p.clamp(0.0, 1.0))))
    }
}

/// Output-shift probabilities shared by all cancellation protocols.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CancellationParams {
    pub pi_bot1: f64,
    pub pi_bot2: f64,
    pub pi_bot3: f64,
    /// πY: mass a Yes owner shifts between slots.
    pub pi_shift_yes: f64,
    /// πN: mass a No owner shifts between slots.
    pub pi_shift_no: f64,
    #[serde(default)]
    pub pi_f1: f64,
    #[serde(default)]
    pub pi_f2: f64,
    #[serde(default)]
    pub pi_f21: f64,
}

impl CancellationParams {
    /// Three-output parameters with a single shift mass.
    pub fn three_output(pi_bot: [f64; 3], shift: f64) -> Self {
        Self {
            pi_bot1: pi_bot[0],
            pi_bot2: pi_bot[1],
            pi_bot3: pi_bot[2],
            pi_shift_yes: shift,
            pi_shift_no: shift,
            pi_f1: 0.0,
            pi_f2: 0.0,
            pi_f21: 0.0,
        }
    }

    fn check_ranges(&self) -> Result<(), ParamError> {
        check_probability("pi_bot1", self.pi_bot1)?;
        check_probability("pi_bot2", self.pi_bot2)?;
        check_probability("pi_bot3", self.pi_bot3)?;
        check_probability("pi_shift_yes", self.pi_shift_yes)?;
        check_probability("pi_shift_no", self.pi_shift_no)?;
        check_probability("pi_f1", self.pi_f1)?;
        check_probability("pi_f2", self.pi_f2)?;
        check_probability("pi_f21", self.pi_f21)?;
        Ok(())
    }

    /// Check the protocol-specific feasibility conditions.
    pub fn validate(&self, protocol: Protocol) -> Result<(), ParamError> {
        self.check_ranges()?;
        match protocol {
            Protocol::TwoOutput => {
                let shift = self.pi_shift_yes.max(self.pi_shift_no);
                if self.pi_bot1 - shift < 0.0 || self.pi_bot1 + shift > 1.0 {
                    return Err(ParamError::InvalidProtocolParams(format!(
                        "two-output protocol needs max(πY, πN) <= π⊥1 <= 1 - max(πY, πN), got π⊥1 = {}, shift = {shift}",
                        self.pi_bot1
                    )));
                }
            }
            Protocol::ThreeOutput => {
                if (self.pi_shift_yes - self.pi_shift_no).abs() > 1e-12 {
                    return Err(ParamError::InvalidProtocolParams(format!(
                        "three-output protocol needs πY = πN, got {} and {}",
                        self.pi_shift_yes, self.pi_shift_no
                    )));
                }
                let sum = self.pi_bot1 + self.pi_bot2 + self.pi_bot3 + self.pi_shift_yes;
                if (sum - 1.0).abs() > SUM_TOLERANCE {
                    return Err(ParamError::InvalidProtocolParams(format!(
                        "three-output protocol needs π⊥1 + π⊥2 + π⊥3 + πY = 1, got {sum}"
                    )));
                }
            }
            Protocol::Abc => {
                let coefficients = AlgebraCoefficients::from_params(self);
                for population in [TrueValue::Yes, TrueValue::No] {
                    for &slot in Protocol::Abc.slots() {
                        abc_distribution(self, &coefficients, population, slot)?;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Per-owner shift coefficients of the A/B/C protocol.
///
/// Each field is the probability that one owner of the named population
/// moves between buckets; multiplied by YES or NO it gives the expectation
/// terms `YES_Y`, `NO_N`, `YES_f1`, `YES_f2`, `NO_f1`, `NO_f2`, `NO_f21`.
/// The fields are public so either reading of the term definitions can be
/// expressed; [`AlgebraCoefficients::from_params`] gives the default one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlgebraCoefficients {
    pub yes_shift: f64,
    pub no_shift: f64,
    pub yes_f1: f64,
    pub yes_f2: f64,
    pub no_f1: f64,
    pub no_f2: f64,
    pub no_f21: f64,
}

impl AlgebraCoefficients {
    /// `YES_Y = πY·YES`, `NO_N = πN·NO`, `YES_fi = π_fi·πY·YES`,
    /// `NO_fi = π_fi·πN·NO`, `NO_f21 = π_f21·NO`.
    pub fn from_params(params: &CancellationParams) -> Self {
        Self {
            yes_shift: params.pi_shift_yes,
            no_shift: params.pi_shift_no,
            yes_f1: params.pi_f1 * params.pi_shift_yes,
            yes_f2: params.pi_f2 * params.pi_shift_yes,
            no_f1: params.pi_f1 * params.pi_shift_no,
            no_f2: params.pi_f2 * params.pi_shift_no,
            no_f21: params.pi_f21,
        }
    }

    /// `(yes_coefficient, no_coefficient)` of the non-TOTAL part of
    /// `E[⊥n]` for a slot, `n` being the bucket index 0..3.
    pub fn expectation_terms(&self, slot: Slot) -> [(f64, f64); 3] {
        let yes_moved = self.yes_f1 + self.yes_f2;
        let no_moved = self.no_f1 + self.no_f2;
        match slot {
            Slot::A => [(self.yes_shift, self.no_shift), (0.0, 0.0), (0.0, 0.0)],
            Slot::B => [
                (self.yes_shift - yes_moved, self.no_shift - no_moved),
                (self.yes_f1, self.no_f1),
                (self.yes_f2, self.no_f2),
            ],
            Slot::C => [
                (self.yes_shift - yes_moved, self.no_shift - no_moved),
                (self.yes_f1, self.no_f1 + self.no_f21),
                (self.yes_f2, self.no_f2 - self.no_f21),
            ],
        }
    }
}

/// Case distribution of the A/B/C protocol for explicit coefficients.
pub fn abc_distribution(
    params: &CancellationParams,
    coefficients: &AlgebraCoefficients,
    population: TrueValue,
    slot: Slot,
) -> Result<MultiDistribution, ParamError> {
    let base = [params.pi_bot1, params.pi_bot2, params.pi_bot3];
    let terms = coefficients.expectation_terms(slot);
    let mut probs = [0.0; 3];
    for (n, p) in probs.iter_mut().enumerate() {
        let shift = match population {
            TrueValue::Yes => terms[n].0,
            TrueValue::No => terms[n].1,
        };
        *p = base[n] + shift;
    }
    MultiDistribution(probs).check(&format!("abc {population:?} slot {slot:?}"))
}

/// `(Yes-owner, No-owner)` A/B/C distributions of one slot.
pub fn abc_distribution_for(
    params: &CancellationParams,
    coefficients: &AlgebraCoefficients,
    slot: Slot,
) -> Result<(MultiDistribution, MultiDistribution), ParamError> {
    Ok((
        abc_distribution(params, coefficients, TrueValue::Yes, slot)?,
        abc_distribution(params, coefficients, TrueValue::No, slot)?,
    ))
}

/// Case distribution of a cancellation protocol for one owner and slot.
pub fn cancellation_distribution(
    params: &CancellationParams,
    protocol: Protocol,
    population: TrueValue,
    slot: Slot,
) -> Result<MultiDistribution, ParamError> {
    if !protocol.slots().contains(&slot) {
        return Err(ParamError::InvalidSlot(slot));
    }
    params.validate(protocol)?;
    let shift = match population {
        TrueValue::Yes => params.pi_shift_yes,
        TrueValue::No => params.pi_shift_no,
    };
    let label = format!("{protocol:?} {population:?} slot {slot:?}");
    match protocol {
        Protocol::TwoOutput => {
            let bot1 = match slot {
                Slot::A => params.pi_bot1 + shift,
                _ => params.pi_bot1 - shift,
            };
            MultiDistribution([bot1, 1.0 - bot1, 0.0]).check(&label)
        }
        Protocol::ThreeOutput => {
            let mut probs = [params.pi_bot1, params.pi_bot2, params.pi_bot3];
            let target = match (slot, population) {
                (Slot::A, TrueValue::Yes) => 0,
                (Slot::A, TrueValue::No) => 1,
                _ => 2,
            };
            probs[target] += shift;
            MultiDistribution(probs).check(&label)
        }
        Protocol::Abc => abc_distribution(
            params,
            &AlgebraCoefficients::from_params(params),
            population,
            slot,
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three() -> CancellationParams {
        CancellationParams::three_output([0.3, 0.3, 0.3], 0.1)
    }

    fn assert_dist(d: MultiDistribution, expected: [f64; 3]) {
        for (a, b) in d.0.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{:?} vs {expected:?}", d.0);
        }
    }

    #[test]
    fn three_output_examples() {
        let p = three();
        let a =
            cancellation_distribution(&p, Protocol::ThreeOutput, TrueValue::Yes, Slot::A).unwrap();
        assert_dist(a, [0.4, 0.3, 0.3]);
        let b =
            cancellation_distribution(&p, Protocol::ThreeOutput, TrueValue::Yes, Slot::B).unwrap();
        assert_dist(b, [0.3, 0.3, 0.4]);
        let na =
            cancellation_distribution(&p, Protocol::ThreeOutput, TrueValue::No, Slot::A).unwrap();
        assert_dist(na, [0.3, 0.4, 0.3]);
        let nb =
            cancellation_distribution(&p, Protocol::ThreeOutput, TrueValue::No, Slot::B).unwrap();
        assert_dist(nb, [0.3, 0.3, 0.4]);
    }

    #[test]
    fn three_output_rejects_unequal_shifts() {
        let mut p = three();
        p.pi_shift_no = 0.05;
        assert!(matches!(
            cancellation_distribution(&p, Protocol::ThreeOutput, TrueValue::Yes, Slot::A),
            Err(ParamError::InvalidProtocolParams(_))
        ));
    }

    #[test]
    fn two_output_feasibility() {
        let p = CancellationParams {
            pi_bot1: 0.5,
            pi_shift_yes: 0.6,
            ..three()
        };
        assert!(matches!(
            cancellation_distribution(&p, Protocol::TwoOutput, TrueValue::Yes, Slot::A),
            Err(ParamError::InvalidProtocolParams(_))
        ));
        let ok = CancellationParams {
            pi_bot1: 0.5,
            pi_shift_yes: 0.2,
            pi_shift_no: 0.05,
            ..three()
        };
        let a =
            cancellation_distribution(&ok, Protocol::TwoOutput, TrueValue::Yes, Slot::A).unwrap();
        assert_dist(a, [0.7, 0.3, 0.0]);
        let b =
            cancellation_distribution(&ok, Protocol::TwoOutput, TrueValue::No, Slot::B).unwrap();
        assert_dist(b, [0.45, 0.55, 0.0]);
    }

    #[test]
    fn slot_c_only_for_abc() {
        assert!(matches!(
            cancellation_distribution(&three(), Protocol::ThreeOutput, TrueValue::Yes, Slot::C),
            Err(ParamError::InvalidSlot(Slot::C))
        ));
    }

    #[test]
    fn abc_distributions_are_proper() {
        let p = CancellationParams {
            pi_f1: 0.3,
            pi_f2: 0.4,
            pi_f21: 0.02,
            ..three()
        };
        for population in [TrueValue::Yes, TrueValue::No] {
            for slot in [Slot::A, Slot::B, Slot::C] {
                let d = cancellation_distribution(&p, Protocol::Abc, population, slot).unwrap();
                assert!((d.0.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
        // moving more No mass out of ⊥3 than was shifted there is infeasible
        let bad = CancellationParams {
            pi_bot3: 0.0,
            pi_bot2: 0.6,
            pi_f21: 0.2,
            ..p
        };
        assert!(bad.validate(Protocol::Abc).is_err());
    }
}
