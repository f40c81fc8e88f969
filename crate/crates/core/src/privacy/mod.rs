//! Privacy accounting: ε of a parameter set, crowd-blending sizes and
//! multi-location exposure.

mod ccdf;

pub use ccdf::{binomial_ccdf, binomial_cdf, binomial_pmf};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::mechanisms::{MechanismParams, Response};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PrivacyError {
    #[error("output {0} has probability zero under both populations")]
    DegenerateOutput(&'static str),
    #[error("confidence {0} is outside (0, 1)")]
    InvalidConfidence(f64),
    #[error("number of locations must be at least 1")]
    NoLocations,
}

impl PrivacyError {
    pub fn code(&self) -> &'static str {
        match self {
            PrivacyError::DegenerateOutput(_) => "DegenerateOutput",
            PrivacyError::InvalidConfidence(_) => "InvalidConfidence",
            PrivacyError::NoLocations => "NoLocations",
        }
    }
}

/// ε values of one parameter set.
///
/// Infinite values serialize as the strings `"inf"` and `"-inf"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyReport {
    #[serde(with = "extended_float")]
    pub epsilon_one: f64,
    #[serde(with = "extended_float")]
    pub epsilon_two: f64,
    #[serde(with = "extended_float")]
    pub epsilon_dp: f64,
    /// `|ln P_yes[⊥] / P_no[⊥]|`. Not part of `epsilon_dp`; `None` when ⊥
    /// is impossible for both populations.
    #[serde(with = "extended_float::option")]
    pub epsilon_bottom: Option<f64>,
}

/// `ln(num/den)` with `x/0 = +∞` and `0/0` rejected.
fn log_ratio(num: f64, den: f64, output: &'static str) -> Result<f64, PrivacyError> {
    if num == 0.0 && den == 0.0 {
        return Err(PrivacyError::DegenerateOutput(output));
    }
    if den == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((num / den).ln())
}

pub fn epsilon_dp(params: &MechanismParams) -> Result<PrivacyReport, PrivacyError> {
    let model = params.output_model();
    let (yes_given_yes, yes_given_no) = model.coefficients(Response::Yes);
    let (no_given_yes, no_given_no) = model.coefficients(Response::No);
    let epsilon_one = log_ratio(yes_given_yes, yes_given_no, "Yes")?;
    let epsilon_two = log_ratio(no_given_no, no_given_yes, "No")?;
    let (bot_yes, bot_no) = model.coefficients(Response::Bottom);
    let epsilon_bottom = log_ratio(bot_yes, bot_no, "Bottom").ok().map(f64::abs);
    Ok(PrivacyReport {
        epsilon_one,
        epsilon_two,
        epsilon_dp: epsilon_one.max(epsilon_two),
        epsilon_bottom,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrowdReport {
    pub expected_noisy_yes: f64,
    pub threshold_at_confidence: u64,
    pub confidence: f64,
}

/// Largest `k` with `P[X ≥ k] ≥ confidence` for `X ~ Binomial(n, p)`.
pub fn crowd_threshold(n: u64, p: f64, confidence: f64) -> Result<u64, PrivacyError> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(PrivacyError::InvalidConfidence(confidence));
    }
    if n == 0 || p <= 0.0 {
        return Ok(0);
    }
    if p >= 1.0 {
        return Ok(n);
    }
    let holds = |k: u64| binomial_ccdf(n, p, k) >= confidence;
    let mean = n as f64 * p;
    let sd = (mean * (1.0 - p)).sqrt();
    let z = Normal::standard().inverse_cdf(confidence);
    let guess = (mean - z * sd).floor().clamp(0.0, n as f64) as u64;

    // bracket lo (holds) < hi (fails), galloping out from the guess
    let (mut lo, mut hi);
    if holds(guess) {
        lo = guess;
        let mut step = 1u64;
        loop {
            let probe = lo.saturating_add(step).min(n + 1);
            if probe > n || !holds(probe) {
                hi = probe;
                break;
            }
            lo = probe;
            step = step.saturating_mul(2);
        }
    } else {
        hi = guess;
        let mut step = 1u64;
        loop {
            let probe = hi.saturating_sub(step);
            if holds(probe) {
                lo = probe;
                break;
            }
            hi = probe;
            step = step.saturating_mul(2);
        }
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if holds(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Size of the crowd of No-population owners who answer "Yes".
pub fn crowd_size(
    no_population: u64,
    params: &MechanismParams,
    confidence: f64,
) -> Result<CrowdReport, PrivacyError> {
    let p = params.pi_s_no() * params.pi_3();
    Ok(CrowdReport {
        expected_noisy_yes: p * no_population as f64,
        threshold_at_confidence: crowd_threshold(no_population, p, confidence)?,
        confidence,
    })
}

/// Expected number of locations at which one owner answers "Yes".
pub fn expected_locations(
    num_locations: u64,
    params: &MechanismParams,
) -> Result<f64, PrivacyError> {
    if num_locations == 0 {
        return Err(PrivacyError::NoLocations);
    }
    let truthful = params.pi_s_yes1() * params.pi_1() + params.pi_s_yes2() * params.pi_2();
    Ok(truthful + (num_locations - 1) as f64 * params.pi_s_no() * params.pi_3())
}

/// JSON has no infinities; these are written as strings.
mod extended_float {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    fn from_repr<E: de::Error>(r: Repr) -> Result<f64, E> {
        match r {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(E::custom(format!("not a number: {other}"))),
            },
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        from_repr(Repr::deserialize(d)?)
    }

    pub mod option {
        use super::*;

        pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
            match v {
                Some(v) => super::serialize(v, s),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
            Option::<Repr>::deserialize(d)?.map(from_repr).transpose()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(v: [f64; 6]) -> MechanismParams {
        MechanismParams::new(v[0], v[1], v[2], v[3], v[4], v[5]).unwrap()
    }

    #[test]
    fn reference_epsilons() {
        let r = epsilon_dp(&MechanismParams::reference()).unwrap();
        // ln(0.9175 / 0.06664), ln(0.00136 / 0.0325)
        assert!(
            (r.epsilon_one - 2.622_347_58).abs() < 1e-6,
            "{}",
            r.epsilon_one
        );
        assert!(
            (r.epsilon_two + 3.173_755_39).abs() < 1e-6,
            "{}",
            r.epsilon_two
        );
        assert_eq!(r.epsilon_dp, r.epsilon_one);
        // |ln(0.05 / 0.932)|
        assert!((r.epsilon_bottom.unwrap() - 2.925_309_81).abs() < 1e-6);
    }

    #[test]
    fn identical_populations_give_zero() {
        let r = epsilon_dp(&params([0.2, 0.2, 0.4, 0.8, 0.8, 0.8])).unwrap();
        assert!(r.epsilon_one.abs() < 1e-12);
        assert!(r.epsilon_two.abs() < 1e-12);
        assert!(r.epsilon_dp.abs() < 1e-12);
    }

    #[test]
    fn unit_coins_are_degenerate() {
        assert_eq!(
            epsilon_dp(&params([0.45, 0.5, 0.068, 1.0, 1.0, 1.0])),
            Err(PrivacyError::DegenerateOutput("No"))
        );
    }

    #[test]
    fn zero_denominator_is_infinite() {
        let r = epsilon_dp(&params([0.45, 0.5, 0.0, 0.95, 0.98, 0.98])).unwrap();
        assert_eq!(r.epsilon_one, f64::INFINITY);
        assert_eq!(r.epsilon_dp, f64::INFINITY);
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"epsilon_dp\":\"inf\""), "{json}");
        let back: PrivacyReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.epsilon_dp, f64::INFINITY);
    }

    #[test]
    fn epsilon_one_decreases_in_no_rate() {
        let base = MechanismParams::reference();
        let mut last = f64::INFINITY;
        for rate in [1e-6, 1e-4, 0.01, 0.068, 0.3, 1.0] {
            let e = epsilon_dp(&base.with_pi_s_no(rate).unwrap())
                .unwrap()
                .epsilon_one;
            assert!(e < last);
            last = e;
        }
    }

    #[test]
    fn reference_crowd() {
        let c = crowd_size(48_719, &MechanismParams::reference(), 0.99).unwrap();
        assert!((c.expected_noisy_yes - 3_246.634_16).abs() < 1e-6);
        // P[X ≥ 3119] = 0.990345… and P[X ≥ 3120] = 0.989859…
        assert_eq!(c.threshold_at_confidence, 3_119);
    }

    #[test]
    fn crowd_edge_cases() {
        let silent = MechanismParams::reference().with_pi_s_no(0.0).unwrap();
        let c = crowd_size(1000, &silent, 0.99).unwrap();
        assert_eq!((c.expected_noisy_yes, c.threshold_at_confidence), (0.0, 0));
        assert!(crowd_size(10, &silent, 1.0).is_err());

        let c = crowd_size(48_719, &MechanismParams::reference(), 0.5).unwrap();
        assert!((c.threshold_at_confidence as f64 - c.expected_noisy_yes.round()).abs() <= 1.0);
    }

    #[test]
    fn threshold_matches_linear_scan() {
        for (n, p, conf) in [
            (50u64, 0.3, 0.9),
            (500, 0.02, 0.99),
            (1, 0.5, 0.4),
            (37, 0.99, 0.7),
        ] {
            let scan = (0..=n)
                .rev()
                .find(|&k| binomial_ccdf(n, p, k) >= conf)
                .unwrap();
            assert_eq!(crowd_threshold(n, p, conf).unwrap(), scan, "n={n} p={p}");
        }
    }

    #[test]
    fn threshold_grows_with_population() {
        let mut last = 0;
        for n in (1000..20_000).step_by(1500) {
            let t = crowd_threshold(n, 0.06664, 0.99).unwrap();
            assert!(t >= last);
            last = t;
        }
    }

    #[test]
    fn locations() {
        let p = MechanismParams::reference();
        let l = expected_locations(3320, &p).unwrap();
        assert!((l - (0.9175 + 3319.0 * 0.06664)).abs() < 1e-9);
        assert!((expected_locations(1, &p).unwrap() - 0.9175).abs() < 1e-12);
        let slope = expected_locations(11, &p).unwrap() - expected_locations(10, &p).unwrap();
        assert!((slope - 0.06664).abs() < 1e-12);
        assert_eq!(expected_locations(0, &p), Err(PrivacyError::NoLocations));
    }
}
