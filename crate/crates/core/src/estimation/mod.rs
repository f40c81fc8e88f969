//! Inverting aggregated tallies into estimates of the Yes population.
//!
//! Each output count of the main mechanism is a sum of two binomial groups,
//! so its expectation is linear in YES and can be inverted directly; its
//! variance is the Poisson-binomial variance of the two groups.

mod cancellation;
mod interval;
mod linear_system;
mod tuning;

pub use cancellation::{
    estimate_cancel_three, estimate_cancel_two, solve_abc_system, solve_abc_system_with,
    AbcEstimate, CancelThreeEstimate, ConsistencyReport, MultiCounts, MultiTally,
};
pub use interval::{confidence_interval, z_quantile};
pub use linear_system::{solve_two_unknowns, Sign, SolverCandidate};
pub use tuning::{min_variance_search, ParamGrid, TuningResult};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mechanisms::{MechanismParams, OutputModel, ParamError, Response};

/// Coefficient differences below this make YES unidentifiable.
pub const SINGULAR_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimationError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("coefficients {coef_yes} and {coef_no} coincide; YES is not identifiable")]
    SingularInversion { coef_yes: f64, coef_no: f64 },
    #[error("tally is empty (DO = 0)")]
    DegenerateTally,
    #[error("linear system is singular (uniform sampling across populations)")]
    SingularSystem,
    #[error("solver precondition violated: {0}")]
    SolverPrecondition(String),
    #[error("shift masses πY and πN are equal; YES is not identifiable")]
    EqualShiftMasses,
    #[error("shift mass πY is zero")]
    ZeroShiftMass,
    #[error("π_f21 mass is zero")]
    ZeroF21Mass,
    #[error("no grid point satisfies the epsilon ceiling")]
    EmptyFeasibleSet,
    #[error("parameter grid is empty")]
    EmptyGrid,
    #[error("confidence {0} is outside (0, 1)")]
    InvalidConfidence(f64),
}

impl EstimationError {
    pub fn code(&self) -> &'static str {
        match self {
            EstimationError::Param(e) => e.code(),
            EstimationError::SingularInversion { .. } => "SingularInversion",
            EstimationError::DegenerateTally => "DegenerateTally",
            EstimationError::SingularSystem => "SingularSystem",
            EstimationError::SolverPrecondition(_) => "SolverPrecondition",
            EstimationError::EqualShiftMasses => "EqualShiftMasses",
            EstimationError::ZeroShiftMass => "ZeroShiftMass",
            EstimationError::ZeroF21Mass => "ZeroF21Mass",
            EstimationError::EmptyFeasibleSet => "EmptyFeasibleSet",
            EstimationError::EmptyGrid => "EmptyGrid",
            EstimationError::InvalidConfidence(_) => "InvalidConfidence",
        }
    }
}

/// Observed response counts for one query at one epoch.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Tally {
    pub yes: u64,
    pub no: u64,
    pub bottom: u64,
}

impl Tally {
    pub const fn new(yes: u64, no: u64, bottom: u64) -> Self {
        Self { yes, no, bottom }
    }

    /// DO: every owner answers exactly once.
    pub const fn total(&self) -> u64 {
        self.yes + self.no + self.bottom
    }

    pub fn record(&mut self, response: Response) {
        match response {
            Response::Yes => self.yes += 1,
            Response::No => self.no += 1,
            Response::Bottom => self.bottom += 1,
        }
    }

    pub fn merge(self, other: Tally) -> Tally {
        Tally {
            yes: self.yes + other.yes,
            no: self.no + other.no,
            bottom: self.bottom + other.bottom,
        }
    }
}

/// Real-valued counts: either an observed [`Tally`] or exact expectations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub yes: f64,
    pub no: f64,
    pub bottom: f64,
}

impl Counts {
    pub const fn new(yes: f64, no: f64, bottom: f64) -> Self {
        Self { yes, no, bottom }
    }

    pub fn total(&self) -> f64 {
        self.yes + self.no + self.bottom
    }

    pub fn get(&self, response: Response) -> f64 {
        match response {
            Response::Yes => self.yes,
            Response::No => self.no,
            Response::Bottom => self.bottom,
        }
    }
}

impl From<Tally> for Counts {
    fn from(t: Tally) -> Self {
        Counts::new(t.yes as f64, t.no as f64, t.bottom as f64)
    }
}

/// Ground-truth split of the owners.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub yes_count: u64,
    pub no_count: u64,
}

impl PopulationSpec {
    pub const fn new(yes_count: u64, no_count: u64) -> Self {
        Self {
            yes_count,
            no_count,
        }
    }

    pub const fn total(&self) -> u64 {
        self.yes_count + self.no_count
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    FromYes,
    FromNo,
    FromBottom,
    LinearSystem,
    CancelTwo,
    CancelThree,
    Abc,
}

impl EstimatorKind {
    /// The output count a single-count estimator inverts.
    pub fn count(self) -> Option<Response> {
        match self {
            EstimatorKind::FromYes => Some(Response::Yes),
            EstimatorKind::FromNo => Some(Response::No),
            EstimatorKind::FromBottom => Some(Response::Bottom),
            _ => None,
        }
    }

    pub fn from_count(response: Response) -> Self {
        match response {
            Response::Yes => EstimatorKind::FromYes,
            Response::No => EstimatorKind::FromNo,
            Response::Bottom => EstimatorKind::FromBottom,
        }
    }
}

/// A point estimate of YES with its spread.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub point: f64,
    pub sigma: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub confidence: f64,
    pub estimator: EstimatorKind,
    /// The raw point lies outside `[0, DO]`. Points are never clamped here.
    pub out_of_range: bool,
}

impl Estimate {
    pub(crate) fn build(
        estimator: EstimatorKind,
        point: f64,
        sigma: f64,
        confidence: f64,
        total: f64,
    ) -> Result<Self, EstimationError> {
        let (ci_low, ci_high) = confidence_interval(point, sigma, confidence)?;
        Ok(Estimate {
            point,
            sigma,
            ci_low,
            ci_high,
            confidence,
            estimator,
            out_of_range: point < 0.0 || point > total,
        })
    }

    pub fn covers(&self, truth: f64) -> bool {
        self.ci_low <= truth && truth <= self.ci_high
    }

    /// Point clamped to `[0, total]`, for presentation.
    pub fn clamped(&self, total: f64) -> f64 {
        self.point.clamp(0.0, total)
    }
}

/// Expected counts of a mechanism described by its output model.
pub fn expected_counts(model: &OutputModel, yes: f64, no: f64) -> Counts {
    let e_yes = model.yes_population.yes * yes + model.no_population.yes * no;
    let e_no = model.yes_population.no * yes + model.no_population.no * no;
    // bottom is the complement so that the triple sums to DO
    Counts::new(e_yes, e_no, yes + no - e_yes - e_no)
}

/// `(E[Yes], E[No], E[Bottom])` of the main mechanism.
pub fn expected_tally(params: &MechanismParams, pop: PopulationSpec) -> Counts {
    expected_counts(
        &params.output_model(),
        pop.yes_count as f64,
        pop.no_count as f64,
    )
}

/// Solve `observed = coef_yes·YES + coef_no·(total − YES)` for YES.
pub fn invert_linear_count(
    observed: f64,
    coef_yes: f64,
    coef_no: f64,
    total: f64,
) -> Result<f64, EstimationError> {
    let slope = coef_yes - coef_no;
    if slope.abs() < SINGULAR_TOLERANCE {
        return Err(EstimationError::SingularInversion { coef_yes, coef_no });
    }
    Ok((observed - coef_no * total) / slope)
}

/// Variance of one output count for real-valued population sizes.
pub fn count_variance(model: &OutputModel, response: Response, yes: f64, no: f64) -> f64 {
    let (p_yes, p_no) = model.coefficients(response);
    p_yes * (1.0 - p_yes) * yes + p_no * (1.0 - p_no) * no
}

/// Variance of the `kind` output count under the main mechanism.
pub fn variance_of_count(kind: Response, params: &MechanismParams, pop: PopulationSpec) -> f64 {
    count_variance(
        &params.output_model(),
        kind,
        pop.yes_count as f64,
        pop.no_count as f64,
    )
}

/// Invert one output count of the main mechanism.
pub fn estimate_count(
    kind: EstimatorKind,
    counts: impl Into<Counts>,
    params: &MechanismParams,
    confidence: f64,
) -> Result<Estimate, EstimationError> {
    estimate_count_with_model(kind, counts, &params.output_model(), confidence)
}

/// [`estimate_count`] for any mechanism with `{Yes, No, Bottom}` outputs.
///
/// The variance is evaluated at the point estimate clamped to `[0, DO]`.
pub fn estimate_count_with_model(
    kind: EstimatorKind,
    counts: impl Into<Counts>,
    model: &OutputModel,
    confidence: f64,
) -> Result<Estimate, EstimationError> {
    let counts = counts.into();
    let response = kind.count().ok_or_else(|| {
        EstimationError::SolverPrecondition(format!("{kind:?} is not a single-count estimator"))
    })?;
    let total = counts.total();
    if total <= 0.0 {
        return Err(EstimationError::DegenerateTally);
    }
    let (coef_yes, coef_no) = model.coefficients(response);
    let point = invert_linear_count(counts.get(response), coef_yes, coef_no, total)?;
    let plug_in = point.clamp(0.0, total);
    let variance = count_variance(model, response, plug_in, total - plug_in);
    let sigma = variance.max(0.0).sqrt() / (coef_yes - coef_no).abs();
    Estimate::build(kind, point, sigma, confidence, total)
}

/// Every single-count estimator that is identifiable under `model`.
pub fn estimate_all_counts(
    counts: impl Into<Counts>,
    model: &OutputModel,
    confidence: f64,
) -> Result<Vec<Estimate>, EstimationError> {
    let counts = counts.into();
    let mut out = Vec::with_capacity(3);
    for kind in [
        EstimatorKind::FromYes,
        EstimatorKind::FromNo,
        EstimatorKind::FromBottom,
    ] {
        match estimate_count_with_model(kind, counts, model, confidence) {
            Ok(estimate) => out.push(estimate),
            Err(EstimationError::SingularInversion { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}
