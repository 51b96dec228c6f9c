use serde::Serialize;

use super::MGF_SLACK;
use crate::error::{Error, Result};
use crate::latency::{norm, random_feasible_flow, LatencyOracle};
use crate::network::Network;
use crate::TrialRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MgfRow {
    pub lambda: f64,
    /// Sample mean of `exp(λ²Z²)`.
    pub estimate: f64,
    /// `exp(216 dλ²σ²)`.
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxMgfReport {
    pub d: u32,
    pub sigma: f64,
    pub trials: usize,
    pub lambda_max: f64,
    pub rows: Vec<MgfRow>,
    pub pass: bool,
}

/// `n` evenly spaced values on `[0, 1/(√(108d)σ)]`.
pub fn admissible_lambdas(d: u32, sigma: f64, n: usize) -> Vec<f64> {
    let max = 1.0 / ((108.0 * d as f64).sqrt() * sigma);
    match n {
        0 => Vec::new(),
        1 => vec![max],
        _ => (0..n).map(|i| max * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Estimates `E[exp(λ²Z²)]` where `Z` is the largest noise norm among `2d`
/// independent draws at independent random flows, and compares it with
/// `exp(216 dλ²σ²)` under 5% slack.
pub fn check_max_mgf(
    oracle: &LatencyOracle,
    network: &Network,
    d: u32,
    lambdas: &[f64],
    trials: usize,
    rng: &mut TrialRng,
) -> Result<MaxMgfReport> {
    if trials < 10_000 {
        return Err(Error::InvalidArgument(format!(
            "max-MGF check needs at least 10^4 trials, got {trials}"
        )));
    }
    if d == 0 {
        return Err(Error::InvalidArgument("budget d must be >= 1".into()));
    }
    let sigma = oracle.sigma();
    let lambda_max = 1.0 / ((108.0 * d as f64).sqrt() * sigma);
    if let Some(bad) = lambdas.iter().find(|l| !(l.abs() <= lambda_max * (1.0 + 1e-12))) {
        return Err(Error::InvalidArgument(format!(
            "lambda {bad} outside the admissible range |lambda| <= {lambda_max}"
        )));
    }
    let group = 2 * d as usize;
    let sq_max: Vec<f64> = (0..trials)
        .map(|_| {
            (0..group)
                .map(|_| {
                    let flow = random_feasible_flow(network, rng);
                    norm(&oracle.sample_noise(flow.as_slice(), rng))
                })
                .fold(0.0, f64::max)
                .powi(2)
        })
        .collect();
    let rows: Vec<MgfRow> = lambdas
        .iter()
        .map(|&lambda| {
            let l2 = lambda * lambda;
            let estimate = sq_max.iter().map(|z2| (l2 * z2).exp()).sum::<f64>() / trials as f64;
            let bound = (216.0 * d as f64 * l2 * sigma * sigma).exp();
            MgfRow {
                lambda,
                estimate,
                bound,
                pass: estimate <= bound * (1.0 + MGF_SLACK),
            }
        })
        .collect();
    let pass = rows.iter().all(|r| r.pass);
    Ok(MaxMgfReport {
        d,
        sigma,
        trials,
        lambda_max,
        rows,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances;
    use crate::latency::{BoundedUniform, LatencySpec, NoiseConfig};
    use rand::SeedableRng;
    use std::sync::Arc;

    fn oracle() -> (Network, LatencyOracle) {
        let net = instances::diamond_network(1.0);
        let spec = LatencySpec::from_config(&instances::diamond_dominated_latency(), &net).unwrap();
        let o = LatencyOracle::new(&net, spec, &NoiseConfig::default(), Arc::new(BoundedUniform)).unwrap();
        (net, o)
    }

    #[test]
    fn zero_lambda_is_exact() {
        let (net, o) = oracle();
        let r = check_max_mgf(&o, &net, 1, &[0.0], 10_000, &mut TrialRng::seed_from_u64(0)).unwrap();
        assert_eq!(r.rows[0].estimate, 1.0);
        assert_eq!(r.rows[0].bound, 1.0);
        assert!(r.pass);
    }

    #[test]
    fn admissible_grid_passes() {
        let (net, o) = oracle();
        for d in [1, 8] {
            let grid = admissible_lambdas(d, o.sigma(), 5);
            assert_eq!(*grid.last().unwrap(), 1.0 / ((108.0 * d as f64).sqrt() * o.sigma()));
            let r = check_max_mgf(&o, &net, d, &grid, 10_000, &mut TrialRng::seed_from_u64(d as u64)).unwrap();
            assert!(r.pass, "{r:?}");
        }
    }

    #[test]
    fn out_of_range_lambda() {
        let (net, o) = oracle();
        let too_big = 2.0 / ((108.0f64).sqrt() * o.sigma());
        assert!(check_max_mgf(&o, &net, 1, &[too_big], 10_000, &mut TrialRng::seed_from_u64(0)).is_err());
    }
}
