use statrs::distribution::{ContinuousCDF, Normal};

use super::EstimationError;

/// Two-sided standard-normal quantile: `P[|Z| ≤ z] = confidence`.
pub fn z_quantile(confidence: f64) -> Result<f64, EstimationError> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(EstimationError::InvalidConfidence(confidence));
    }
    Ok(Normal::standard().inverse_cdf(0.5 + 0.5 * confidence))
}

/// Normal-approximation interval `point ± z·sigma`.
pub fn confidence_interval(
    point: f64,
    sigma: f64,
    confidence: f64,
) -> Result<(f64, f64), EstimationError> {
    let z = z_quantile(confidence)?;
    let half = z * sigma;
    Ok((point - half, point + half))
}
