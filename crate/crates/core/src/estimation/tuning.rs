//! Grid search for the parameter set with the smallest Yes-count variance.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{variance_of_count, EstimationError, PopulationSpec};
use crate::mechanisms::{MechanismParams, RawMechanismParams, Response};
use crate::privacy::epsilon_dp;

/// Candidate parameter sets, either listed or as the product of per-field axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamGrid {
    Points(Vec<MechanismParams>),
    Axes {
        pi_s_yes1: Vec<f64>,
        pi_s_yes2: Vec<f64>,
        pi_s_no: Vec<f64>,
        pi_1: Vec<f64>,
        pi_2: Vec<f64>,
        pi_3: Vec<f64>,
    },
}

impl ParamGrid {
    /// Every valid parameter set of the grid. Infeasible axis combinations
    /// (for instance `pi_s_yes1 + pi_s_yes2 > 1`) are dropped.
    pub fn points(&self) -> Vec<MechanismParams> {
        match self {
            ParamGrid::Points(points) => points.clone(),
            ParamGrid::Axes {
                pi_s_yes1,
                pi_s_yes2,
                pi_s_no,
                pi_1,
                pi_2,
                pi_3,
            } => {
                let mut out = Vec::new();
                for &a in pi_s_yes1 {
                    for &b in pi_s_yes2 {
                        for &c in pi_s_no {
                            for &d in pi_1 {
                                for &e in pi_2 {
                                    for &f in pi_3 {
                                        let raw = RawMechanismParams {
                                            pi_s_yes1: a,
                                            pi_s_yes2: b,
                                            pi_s_no: c,
                                            pi_1: d,
                                            pi_2: e,
                                            pi_3: f,
                                        };
                                        if let Ok(p) = MechanismParams::try_from(raw) {
                                            out.push(p);
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuningResult {
    pub params: MechanismParams,
    /// Variance of the Yes count at the given population.
    pub variance: f64,
    /// `None` when ε is undefined for these parameters.
    pub epsilon: Option<f64>,
}

fn order(a: &TuningResult, b: &TuningResult) -> Ordering {
    let eps = |r: &TuningResult| r.epsilon.unwrap_or(f64::INFINITY);
    a.variance
        .total_cmp(&b.variance)
        .then_with(|| eps(a).total_cmp(&eps(b)))
        .then_with(|| {
            let (x, y) = (a.params.as_array(), b.params.as_array());
            x.iter()
                .zip(y.iter())
                .map(|(u, v)| u.total_cmp(v))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
}

/// Grid point minimizing the Yes-count variance, subject to an optional
/// ceiling on ε. Ties go to smaller ε, then to the lexicographically
/// smaller parameter vector.
pub fn min_variance_search(
    grid: &[MechanismParams],
    pop: PopulationSpec,
    epsilon_ceiling: Option<f64>,
) -> Result<TuningResult, EstimationError> {
    if grid.is_empty() {
        return Err(EstimationError::EmptyGrid);
    }
    grid.par_iter()
        .filter_map(|params| {
            let epsilon = epsilon_dp(params).ok().map(|r| r.epsilon_dp);
            if let Some(ceiling) = epsilon_ceiling {
                match epsilon {
                    Some(e) if e <= ceiling => {}
                    _ => return None,
                }
            }
            Some(TuningResult {
                params: *params,
                variance: variance_of_count(Response::Yes, params, pop),
                epsilon,
            })
        })
        .min_by(order)
        .ok_or(EstimationError::EmptyFeasibleSet)
}
