use serde::Serialize;
use statrs::distribution::{Beta, ContinuousCDF};

use crate::error::{Error, Result};

/// Smallest trial count accepted by the resilience estimator.
pub const MIN_TRIALS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResilienceEstimate {
    pub epsilon: f64,
    pub delta: f64,
    pub trials: usize,
    pub successes: usize,
    pub probability: f64,
    /// 95% Clopper–Pearson interval for the success probability.
    pub ci_low: f64,
    pub ci_high: f64,
    /// The rate-form bound, when it was used to pick `epsilon`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theoretical_epsilon: Option<f64>,
    /// `ci_low ≥ 1 − δ`.
    pub pass: bool,
}

/// Exact two-sided binomial interval at level `1 − alpha`.
pub fn clopper_pearson(successes: usize, trials: usize, alpha: f64) -> (f64, f64) {
    let (x, n) = (successes as f64, trials as f64);
    let lower = if successes == 0 {
        0.0
    } else {
        Beta::new(x, n - x + 1.0)
            .expect("positive shape parameters")
            .inverse_cdf(alpha / 2.0)
    };
    let upper = if successes == trials {
        1.0
    } else {
        Beta::new(x + 1.0, n - x)
            .expect("positive shape parameters")
            .inverse_cdf(1.0 - alpha / 2.0)
    };
    (lower, upper)
}

/// Counts trials whose time-averaged gap `Φ(μ̄ᵀ) − Φ*` lies below `epsilon`.
pub fn estimate_wanes(average_gaps: &[f64], epsilon: f64, delta: f64) -> Result<ResilienceEstimate> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta must lie in (0, 1), got {delta}")));
    }
    if average_gaps.len() < MIN_TRIALS {
        return Err(Error::InvalidArgument(format!(
            "resilience estimate needs at least {MIN_TRIALS} trials, got {}",
            average_gaps.len()
        )));
    }
    let trials = average_gaps.len();
    let successes = average_gaps.iter().filter(|&&g| g < epsilon).count();
    let (ci_low, ci_high) = clopper_pearson(successes, trials, 0.05);
    Ok(ResilienceEstimate {
        epsilon,
        delta,
        trials,
        successes,
        probability: successes as f64 / trials as f64,
        ci_low,
        ci_high,
        theoretical_epsilon: None,
        pass: ci_low >= 1.0 - delta,
    })
}
