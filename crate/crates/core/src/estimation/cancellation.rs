//! Estimators for the dual/triple-response cancellation protocols.

use serde::{Deserialize, Serialize};

use super::{Estimate, EstimationError, EstimatorKind};
use crate::mechanisms::{
    abc_distribution_for, cancellation_distribution, AlgebraCoefficients, CancellationParams,
    MultiResponse, Protocol, TrueValue,
};
use crate::rng::Slot;

/// Per-slot counts of `(⊥1, ⊥2, ⊥3)`. Unused slots stay zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiTally {
    pub slots: [[u64; 3]; 3],
    pub total: u64,
}

impl MultiTally {
    pub fn new(total: u64) -> Self {
        Self {
            slots: [[0; 3]; 3],
            total,
        }
    }

    pub fn record(&mut self, slot: Slot, response: MultiResponse) {
        self.slots[slot.index()][response.index()] += 1;
    }

    pub fn count(&self, slot: Slot, bucket: MultiResponse) -> u64 {
        self.slots[slot.index()][bucket.index()]
    }

    pub fn merge(mut self, other: MultiTally) -> MultiTally {
        for (mine, theirs) in self.slots.iter_mut().zip(other.slots) {
            for (a, b) in mine.iter_mut().zip(theirs) {
                *a += b;
            }
        }
        self
    }

    /// Every slot of `protocol` accounts for all owners.
    pub fn is_consistent(&self, protocol: Protocol) -> bool {
        protocol
            .slots()
            .iter()
            .all(|s| self.slots[s.index()].iter().sum::<u64>() == self.total)
    }
}

/// Real-valued per-slot counts (observed or exact expectations).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MultiCounts {
    pub slots: [[f64; 3]; 3],
    pub total: f64,
}

impl MultiCounts {
    pub fn get(&self, slot: Slot, bucket: usize) -> f64 {
        self.slots[slot.index()][bucket]
    }

    /// Exact expected counts of a protocol for a given population.
    pub fn expected(
        params: &CancellationParams,
        protocol: Protocol,
        yes: f64,
        no: f64,
    ) -> Result<Self, EstimationError> {
        let mut out = MultiCounts {
            slots: [[0.0; 3]; 3],
            total: yes + no,
        };
        for &slot in protocol.slots() {
            let dy = cancellation_distribution(params, protocol, TrueValue::Yes, slot)?;
            let dn = cancellation_distribution(params, protocol, TrueValue::No, slot)?;
            for n in 0..3 {
                out.slots[slot.index()][n] = dy.0[n] * yes + dn.0[n] * no;
            }
        }
        Ok(out)
    }
}

impl From<MultiTally> for MultiCounts {
    fn from(t: MultiTally) -> Self {
        MultiCounts {
            slots: t.slots.map(|s| s.map(|c| c as f64)),
            total: t.total as f64,
        }
    }
}

fn bernoulli_group_variance(p_yes: f64, p_no: f64, yes: f64, no: f64) -> f64 {
    p_yes * (1.0 - p_yes) * yes + p_no * (1.0 - p_no) * no
}

/// Variance of one bucket count at a plug-in population.
fn bucket_variance(
    params: &CancellationParams,
    protocol: Protocol,
    slot: Slot,
    bucket: usize,
    yes: f64,
    no: f64,
) -> Result<f64, EstimationError> {
    let dy = cancellation_distribution(params, protocol, TrueValue::Yes, slot)?;
    let dn = cancellation_distribution(params, protocol, TrueValue::No, slot)?;
    Ok(bernoulli_group_variance(
        dy.0[bucket],
        dn.0[bucket],
        yes,
        no,
    ))
}

/// Two-output protocol: `E[⊥1A] − E[⊥1B] = 2πY·YES + 2πN·(TOTAL − YES)`.
pub fn estimate_cancel_two(
    counts: impl Into<MultiCounts>,
    params: &CancellationParams,
    confidence: f64,
) -> Result<Estimate, EstimationError> {
    let counts = counts.into();
    params.validate(Protocol::TwoOutput)?;
    let slope = 2.0 * (params.pi_shift_yes - params.pi_shift_no);
    if slope.abs() < super::SINGULAR_TOLERANCE {
        return Err(EstimationError::EqualShiftMasses);
    }
    let total = counts.total;
    if total <= 0.0 {
        return Err(EstimationError::DegenerateTally);
    }
    let diff = counts.get(Slot::A, 0) - counts.get(Slot::B, 0);
    let point = (diff - 2.0 * params.pi_shift_no * total) / slope;
    let yes = point.clamp(0.0, total);
    let variance = bucket_variance(params, Protocol::TwoOutput, Slot::A, 0, yes, total - yes)?
        + bucket_variance(params, Protocol::TwoOutput, Slot::B, 0, yes, total - yes)?;
    Estimate::build(
        EstimatorKind::CancelTwo,
        point,
        variance.sqrt() / slope.abs(),
        confidence,
        total,
    )
}

/// Residuals of the three-output estimate against the equations it did not use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    /// `|YES + NO − TOTAL|`
    pub total_residual: f64,
    /// `|(⊥3B − ⊥3A) − (πY·YES + πN·NO)|`
    pub bottom3_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CancelThreeEstimate {
    pub estimate: Estimate,
    pub no_estimate: f64,
    pub consistency: ConsistencyReport,
}

/// Three-output protocol: `YES = (⊥1A − ⊥1B)/πY`, `NO = (⊥2A − ⊥2B)/πN`.
pub fn estimate_cancel_three(
    counts: impl Into<MultiCounts>,
    params: &CancellationParams,
    confidence: f64,
) -> Result<CancelThreeEstimate, EstimationError> {
    let counts = counts.into();
    if params.pi_shift_yes <= 0.0 {
        return Err(EstimationError::ZeroShiftMass);
    }
    params.validate(Protocol::ThreeOutput)?;
    let total = counts.total;
    if total <= 0.0 {
        return Err(EstimationError::DegenerateTally);
    }
    let point = (counts.get(Slot::A, 0) - counts.get(Slot::B, 0)) / params.pi_shift_yes;
    let no_estimate = (counts.get(Slot::A, 1) - counts.get(Slot::B, 1)) / params.pi_shift_no;
    let consistency = ConsistencyReport {
        total_residual: (point + no_estimate - total).abs(),
        bottom3_residual: ((counts.get(Slot::B, 2) - counts.get(Slot::A, 2))
            - (params.pi_shift_yes * point + params.pi_shift_no * no_estimate))
            .abs(),
    };
    let yes = point.clamp(0.0, total);
    let variance = bucket_variance(params, Protocol::ThreeOutput, Slot::A, 0, yes, total - yes)?
        + bucket_variance(params, Protocol::ThreeOutput, Slot::B, 0, yes, total - yes)?;
    let estimate = Estimate::build(
        EstimatorKind::CancelThree,
        point,
        variance.sqrt() / params.pi_shift_yes,
        confidence,
        total,
    )?;
    Ok(CancelThreeEstimate {
        estimate,
        no_estimate,
        consistency,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbcEstimate {
    /// Back-substitution estimate.
    pub estimate: Estimate,
    pub no_estimate: f64,
    /// Constrained least-squares YES over all nine bucket equations.
    pub least_squares_yes: f64,
    /// Euclidean norm of the nine least-squares residuals.
    pub residual_norm: f64,
}

/// A/B/C protocol with the default term coefficients.
pub fn solve_abc_system(
    counts: impl Into<MultiCounts>,
    params: &CancellationParams,
    confidence: f64,
) -> Result<AbcEstimate, EstimationError> {
    solve_abc_system_with(
        counts,
        params,
        &AlgebraCoefficients::from_params(params),
        confidence,
    )
}

/// A/B/C protocol: `NO = (⊥2C − ⊥2B)/NO_f21-coefficient`, `YES = TOTAL − NO`,
/// cross-checked by least squares over every bucket with `NO = TOTAL − YES`.
pub fn solve_abc_system_with(
    counts: impl Into<MultiCounts>,
    params: &CancellationParams,
    coefficients: &AlgebraCoefficients,
    confidence: f64,
) -> Result<AbcEstimate, EstimationError> {
    let counts = counts.into();
    if coefficients.no_f21 <= 0.0 {
        return Err(EstimationError::ZeroF21Mass);
    }
    let total = counts.total;
    if total <= 0.0 {
        return Err(EstimationError::DegenerateTally);
    }
    let no_estimate = (counts.get(Slot::C, 1) - counts.get(Slot::B, 1)) / coefficients.no_f21;
    let point = total - no_estimate;

    let base = [params.pi_bot1, params.pi_bot2, params.pi_bot3];
    let (mut num, mut den) = (0.0, 0.0);
    let mut rows = Vec::with_capacity(9);
    for slot in [Slot::A, Slot::B, Slot::C] {
        let terms = coefficients.expectation_terms(slot);
        for (n, &(a, b)) in terms.iter().enumerate() {
            // obs = (π⊥n + b)·TOTAL + (a − b)·YES
            let r0 = counts.get(slot, n) - (base[n] + b) * total;
            let g = a - b;
            num += g * r0;
            den += g * g;
            rows.push((r0, g));
        }
    }
    let least_squares_yes = if den > 0.0 { num / den } else { f64::NAN };
    let residual_norm = if den > 0.0 {
        rows.iter()
            .map(|(r0, g)| (r0 - g * least_squares_yes).powi(2))
            .sum::<f64>()
            .sqrt()
    } else {
        f64::NAN
    };

    let yes = point.clamp(0.0, total);
    let no = total - yes;
    let b = abc_distribution_for(params, coefficients, Slot::B)?;
    let c = abc_distribution_for(params, coefficients, Slot::C)?;
    let variance = bernoulli_group_variance(b.0 .0[1], b.1 .0[1], yes, no)
        + bernoulli_group_variance(c.0 .0[1], c.1 .0[1], yes, no);
    let estimate = Estimate::build(
        EstimatorKind::Abc,
        point,
        variance.sqrt() / coefficients.no_f21,
        confidence,
        total,
    )?;
    Ok(AbcEstimate {
        estimate,
        no_estimate,
        least_squares_yes,
        residual_norm,
    })
}
