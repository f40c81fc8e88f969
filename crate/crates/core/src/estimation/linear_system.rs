//! Joint solve for YES and a shared deviation σ when every sampled owner
//! answers "Yes" (π1 = π2 = π3 = 1).
//!
//! For a sign pattern `(s1, s2)` the unknowns `(YES, σ)` satisfy
//!
//! ```text
//! E[Yes](YES)    + s1·σ = observed Yes
//! E[Bottom](YES) + s2·σ = observed Bottom
//! ```
//!
//! and the total `E[Yes] + s1·σ + E[Bottom] + s2·σ + observed No = DO`.
//! With no "No" responses the two equations are dependent whenever
//! `s1 = −s2`; those patterns are rank-deficient and carry no extra
//! information, so only the full-rank patterns produce candidates.

use serde::{Deserialize, Serialize};

use super::{Counts, EstimationError, SINGULAR_TOLERANCE};
use crate::mechanisms::MechanismParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverCandidate {
    pub yes_estimate: f64,
    pub sigma: f64,
    pub sign_pattern: (Sign, Sign),
}

const PATTERNS: [(Sign, Sign); 4] = [
    (Sign::Plus, Sign::Plus),
    (Sign::Plus, Sign::Minus),
    (Sign::Minus, Sign::Plus),
    (Sign::Minus, Sign::Minus),
];

/// Solve the 2×2 system for every sign pattern and keep the admissible
/// candidates (YES ≥ 0, σ ≥ 0, consistent with the total). Candidates that
/// coincide across patterns are reported once.
pub fn solve_two_unknowns(
    counts: impl Into<Counts>,
    params: &MechanismParams,
) -> Result<Vec<SolverCandidate>, EstimationError> {
    let counts = counts.into();
    if params.pi_1() != 1.0 || params.pi_2() != 1.0 || params.pi_3() != 1.0 {
        return Err(EstimationError::SolverPrecondition(
            "the joint solve requires pi_1 = pi_2 = pi_3 = 1".into(),
        ));
    }
    let total = counts.total();
    if total <= 0.0 {
        return Err(EstimationError::DegenerateTally);
    }
    let sampled_yes = params.pi_s_yes1() + params.pi_s_yes2();
    let sampled_no = params.pi_s_no();
    // E[Yes] = sampled_yes·YES + sampled_no·(DO − YES)
    let c_yes = sampled_yes - sampled_no;
    let r_yes = counts.yes - sampled_no * total;
    // E[Bottom] = (1 − sampled_yes)·YES + (1 − sampled_no)·(DO − YES)
    let c_bottom = sampled_no - sampled_yes;
    let r_bottom = counts.bottom - (1.0 - sampled_no) * total;
    if c_yes.abs() < SINGULAR_TOLERANCE {
        return Err(EstimationError::SingularSystem);
    }

    let tol = 1e-9 * total.max(1.0);
    let mut out: Vec<SolverCandidate> = Vec::new();
    for (s1, s2) in PATTERNS {
        let (a, b) = (s1.value(), s2.value());
        let det = c_yes * b - a * c_bottom;
        if det.abs() < SINGULAR_TOLERANCE {
            continue;
        }
        let yes = (r_yes * b - a * r_bottom) / det;
        let sigma = (c_yes * r_bottom - c_bottom * r_yes) / det;
        if yes < -tol || sigma < -tol {
            continue;
        }
        let (yes, sigma) = (yes.max(0.0), sigma.max(0.0));
        let modeled = sampled_yes * yes
            + sampled_no * (total - yes)
            + a * sigma
            + (1.0 - sampled_yes) * yes
            + (1.0 - sampled_no) * (total - yes)
            + b * sigma
            + counts.no;
        if (modeled - total).abs() > tol {
            continue;
        }
        let duplicate = out
            .iter()
            .any(|c| (c.yes_estimate - yes).abs() <= tol && (c.sigma - sigma).abs() <= tol);
        if !duplicate {
            out.push(SolverCandidate {
                yes_estimate: yes,
                sigma,
                sign_pattern: (s1, s2),
            });
        }
    }
    Ok(out)
}
