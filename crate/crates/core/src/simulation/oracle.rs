//! Exact and Monte Carlo reference computations for the estimators.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Sampler, SimulationError};
use crate::estimation::{
    count_variance, estimate_all_counts, Counts, EstimatorKind, PopulationSpec, Tally,
};
use crate::mechanisms::{MechanismParams, OutputModel, Response, ResponseDistribution};

/// Largest population for full enumeration (3^DO outcomes).
pub const ENUMERATION_LIMIT: u64 = 20;
/// Largest population for the per-count convolution.
pub const CONVOLUTION_LIMIT: u64 = 10_000;

const RESPONSES: [Response; 3] = [Response::Yes, Response::No, Response::Bottom];

/// Exact joint distribution of the tally.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactDistribution {
    /// Every reachable tally with its probability, in tally order.
    pub outcomes: Vec<(Tally, f64)>,
    pub mean: Counts,
    pub variance: Counts,
}

/// Enumerate all `3^DO` response vectors of `pop` under `params`.
pub fn enumerate_exact(
    pop: PopulationSpec,
    params: &MechanismParams,
) -> Result<ExactDistribution, SimulationError> {
    enumerate_exact_with_model(pop, &params.output_model())
}

pub fn enumerate_exact_with_model(
    pop: PopulationSpec,
    model: &OutputModel,
) -> Result<ExactDistribution, SimulationError> {
    let total = pop.total();
    if total > ENUMERATION_LIMIT {
        return Err(SimulationError::TooLarge {
            owners: total,
            limit: ENUMERATION_LIMIT,
        });
    }
    let owners: Vec<&ResponseDistribution> = (0..total)
        .map(|i| {
            if i < pop.yes_count {
                &model.yes_population
            } else {
                &model.no_population
            }
        })
        .collect();
    let mut acc = BTreeMap::new();
    visit(&owners, 1.0, Tally::default(), &mut acc);

    let outcomes: Vec<(Tally, f64)> = acc
        .into_iter()
        .map(|((yes, no, bottom), p)| (Tally::new(yes, no, bottom), p))
        .collect();
    let moment = |f: &dyn Fn(&Tally) -> f64| -> (f64, f64) {
        let mean: f64 = outcomes.iter().map(|(t, p)| p * f(t)).sum();
        let var: f64 = outcomes
            .iter()
            .map(|(t, p)| p * (f(t) - mean).powi(2))
            .sum();
        (mean, var)
    };
    let (my, vy) = moment(&|t| t.yes as f64);
    let (mn, vn) = moment(&|t| t.no as f64);
    let (mb, vb) = moment(&|t| t.bottom as f64);
    Ok(ExactDistribution {
        outcomes,
        mean: Counts::new(my, mn, mb),
        variance: Counts::new(vy, vn, vb),
    })
}

fn visit(
    owners: &[&ResponseDistribution],
    prob: f64,
    tally: Tally,
    acc: &mut BTreeMap<(u64, u64, u64), f64>,
) {
    let Some((first, rest)) = owners.split_first() else {
        *acc.entry((tally.yes, tally.no, tally.bottom))
            .or_insert(0.0) += prob;
        return;
    };
    for r in RESPONSES {
        let p = first.probability(r);
        if p > 0.0 {
            let mut next = tally;
            next.record(r);
            visit(rest, prob * p, next, acc);
        }
    }
}

/// Exact marginal distribution of each count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalMoments {
    /// `pmf[r][k] = P[count of response r = k]`, responses ordered Yes, No, Bottom.
    pub pmf: [Vec<f64>; 3],
    pub mean: Counts,
    pub variance: Counts,
}

/// Per-count distributions by convolving the owners' Bernoulli indicators.
pub fn convolve_exact(
    pop: PopulationSpec,
    params: &MechanismParams,
) -> Result<MarginalMoments, SimulationError> {
    let total = pop.total();
    if total > CONVOLUTION_LIMIT {
        return Err(SimulationError::TooLarge {
            owners: total,
            limit: CONVOLUTION_LIMIT,
        });
    }
    let model = params.output_model();
    let mut pmf: [Vec<f64>; 3] = Default::default();
    let mut mean = [0.0; 3];
    let mut variance = [0.0; 3];
    for (i, r) in RESPONSES.into_iter().enumerate() {
        let (p_yes, p_no) = model.coefficients(r);
        let mut dist = vec![0.0; total as usize + 1];
        dist[0] = 1.0;
        for (n, owner) in (0..total).enumerate() {
            let p = if owner < pop.yes_count { p_yes } else { p_no };
            for k in (1..=n + 1).rev() {
                dist[k] = dist[k] * (1.0 - p) + dist[k - 1] * p;
            }
            dist[0] *= 1.0 - p;
        }
        let m: f64 = dist.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        let v: f64 = dist
            .iter()
            .enumerate()
            .map(|(k, p)| (k as f64 - m).powi(2) * p)
            .sum();
        mean[i] = m;
        variance[i] = v;
        pmf[i] = dist;
    }
    Ok(MarginalMoments {
        pmf,
        mean: Counts::new(mean[0], mean[1], mean[2]),
        variance: Counts::new(variance[0], variance[1], variance[2]),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorCalibration {
    pub estimator: EstimatorKind,
    pub mean: f64,
    pub bias: f64,
    /// Standard error of `mean`.
    pub standard_error: f64,
    pub empirical_variance: f64,
    /// Variance of the estimator at the true population.
    pub predicted_variance: f64,
    pub variance_ratio: f64,
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub trials: u64,
    pub truth: u64,
    pub estimators: Vec<EstimatorCalibration>,
}

impl CalibrationReport {
    pub fn get(&self, kind: EstimatorKind) -> Option<&EstimatorCalibration> {
        self.estimators.iter().find(|e| e.estimator == kind)
    }
}

/// Repeat the mechanism `trials` times (trial `i` uses epoch `i` of the
/// substream space) and compare each estimator with its theory.
pub fn monte_carlo_calibration(
    params: &MechanismParams,
    pop: PopulationSpec,
    trials: u64,
    confidence: f64,
    seed: u64,
) -> Result<CalibrationReport, SimulationError> {
    if trials < 100 {
        return Err(SimulationError::TooFewTrials(trials));
    }
    let model = params.output_model();
    let sampler = Sampler::Single(model);
    let truth = pop.yes_count as f64;
    let runs = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let tally = sampler
                .run(pop, seed, trial, 0)
                .single()
                .expect("single-response sampler");
            Ok(estimate_all_counts(tally, &model, confidence)?)
        })
        .collect::<Result<Vec<_>, SimulationError>>()?;

    let mut estimators = Vec::new();
    for (kind, response) in [
        (EstimatorKind::FromYes, Response::Yes),
        (EstimatorKind::FromNo, Response::No),
        (EstimatorKind::FromBottom, Response::Bottom),
    ] {
        let points: Vec<(f64, bool)> = runs
            .iter()
            .filter_map(|r| r.iter().find(|e| e.estimator == kind))
            .map(|e| (e.point, e.covers(truth)))
            .collect();
        if points.len() as u64 != trials {
            continue;
        }
        let n = points.len() as f64;
        let mean = points.iter().map(|p| p.0).sum::<f64>() / n;
        let empirical_variance =
            points.iter().map(|p| (p.0 - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let (cy, cn) = model.coefficients(response);
        let predicted_variance =
            count_variance(&model, response, truth, pop.no_count as f64) / (cy - cn).powi(2);
        let variance_ratio = if predicted_variance > 0.0 {
            empirical_variance / predicted_variance
        } else if empirical_variance == 0.0 {
            1.0
        } else {
            f64::INFINITY
        };
        estimators.push(EstimatorCalibration {
            estimator: kind,
            mean,
            bias: mean - truth,
            standard_error: (empirical_variance / n).sqrt(),
            empirical_variance,
            predicted_variance,
            variance_ratio,
            coverage: points.iter().filter(|p| p.1).count() as f64 / n,
        });
    }
    Ok(CalibrationReport {
        trials,
        truth: pop.yes_count,
        estimators,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::{expected_tally, variance_of_count};

    #[test]
    fn two_owners() {
        let e = enumerate_exact(PopulationSpec::new(1, 1), &MechanismParams::reference()).unwrap();
        // 0.9175 + 0.06664
        assert!((e.mean.yes - 0.98414).abs() < 1e-15);
        let total: f64 = e.outcomes.iter().map(|o| o.1).sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn noiseless_point_mass() {
        let p = MechanismParams::new(1.0, 0.0, 0.3, 1.0, 0.5, 0.5).unwrap();
        let e = enumerate_exact(PopulationSpec::new(2, 0), &p).unwrap();
        assert_eq!(e.outcomes, vec![(Tally::new(2, 0, 0), 1.0)]);
    }

    #[test]
    fn limits() {
        let p = MechanismParams::reference();
        assert!(matches!(
            enumerate_exact(PopulationSpec::new(11, 10), &p),
            Err(SimulationError::TooLarge {
                owners: 21,
                limit: 20
            })
        ));
        assert!(convolve_exact(PopulationSpec::new(10_001, 0), &p).is_err());
    }

    #[test]
    fn convolution_matches_closed_forms() {
        let p = MechanismParams::reference();
        let pop = PopulationSpec::new(40, 300);
        let m = convolve_exact(pop, &p).unwrap();
        let e = expected_tally(&p, pop);
        assert!((m.mean.yes - e.yes).abs() < 1e-9);
        assert!((m.mean.bottom - e.bottom).abs() < 1e-9);
        assert!((m.variance.no - variance_of_count(Response::No, &p, pop)).abs() < 1e-9);
        assert!((m.pmf[0].iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noiseless_calibration() {
        let p = MechanismParams::new(1.0, 0.0, 0.0, 1.0, 0.5, 0.5).unwrap();
        let r = monte_carlo_calibration(&p, PopulationSpec::new(30, 70), 100, 0.99, 1).unwrap();
        let y = r.get(EstimatorKind::FromYes).unwrap();
        assert_eq!((y.bias, y.empirical_variance, y.coverage), (0.0, 0.0, 1.0));
        assert_eq!(y.variance_ratio, 1.0);
        assert!(monte_carlo_calibration(&p, PopulationSpec::new(3, 3), 99, 0.99, 1).is_err());
    }

    #[test]
    fn calibration_is_deterministic() {
        let p = MechanismParams::reference();
        let pop = PopulationSpec::new(100, 2000);
        let a = monte_carlo_calibration(&p, pop, 100, 0.99, 8).unwrap();
        assert_eq!(a, monte_carlo_calibration(&p, pop, 100, 0.99, 8).unwrap());
        assert_eq!(a.estimators.len(), 3);
    }
}
