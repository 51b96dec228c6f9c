//! Stochastic latency oracles: polynomial mean edge latencies, additive edge
//! noise lifted to paths by `Λᵀ`, the Beckmann potential and the
//! subgaussian self-check.

use std::collections::BTreeMap;
use std::fmt::Debug;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{IncidenceMatrix, Network, PathFlow};
use crate::TrialRng;

/// Mean edge latency `a + b·q^p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeLatency {
    pub free_flow: f64,
    pub slope: f64,
    pub power: f64,
}

impl EdgeLatency {
    pub fn new(free_flow: f64, slope: f64, power: f64) -> Self {
        EdgeLatency {
            free_flow,
            slope,
            power,
        }
    }

    pub fn mean(&self, q: f64) -> f64 {
        self.free_flow + self.slope * q.max(0.0).powf(self.power)
    }

    /// `∫₀^q l(s) ds`.
    pub fn integral(&self, q: f64) -> f64 {
        let q = q.max(0.0);
        self.free_flow * q + self.slope * q.powf(self.power + 1.0) / (self.power + 1.0)
    }

    fn validate(&self, edge: &str) -> Result<()> {
        let ok = self.free_flow.is_finite()
            && self.free_flow >= 0.0
            && self.slope.is_finite()
            && self.slope > 0.0
            && self.power.is_finite()
            && self.power >= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::config(
                format!("/latency/edges/{edge}"),
                format!(
                    "need free_flow >= 0, slope > 0, power >= 1; got ({}, {}, {})",
                    self.free_flow, self.slope, self.power
                ),
            ))
        }
    }
}

impl Default for EdgeLatency {
    fn default() -> Self {
        EdgeLatency::new(0.0, 1.0, 1.0)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencyConfig {
    #[serde(default)]
    pub default: EdgeLatency,
    #[serde(default)]
    pub edges: BTreeMap<String, EdgeLatency>,
}

/// Per-edge latency coefficients in network edge order.
#[derive(Debug, Clone, PartialEq)]
pub struct LatencySpec {
    edges: Vec<EdgeLatency>,
}

impl LatencySpec {
    pub fn from_config(config: &LatencyConfig, network: &Network) -> Result<Self> {
        for id in config.edges.keys() {
            if !network.edges().iter().any(|e| &e.id == id) {
                return Err(Error::config(
                    format!("/latency/edges/{id}"),
                    "no such edge in the network",
                ));
            }
        }
        let edges = network
            .edges()
            .iter()
            .map(|e| {
                let spec = config.edges.get(&e.id).copied().unwrap_or(config.default);
                spec.validate(&e.id).map(|_| spec)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(LatencySpec { edges })
    }

    pub fn edges(&self) -> &[EdgeLatency] {
        &self.edges
    }

    pub fn edge_means(&self, edge_flow: &[f64]) -> Vec<f64> {
        self.edges
            .iter()
            .zip(edge_flow)
            .map(|(l, &q)| l.mean(q))
            .collect()
    }

    pub fn potential_from_edges(&self, edge_flow: &[f64]) -> f64 {
        self.edges
            .iter()
            .zip(edge_flow)
            .map(|(l, &q)| l.integral(q))
            .sum()
    }
}

/// `E[ℓ(μ)] = Λᵀ l̄(Λμ)`, which is also `∇Φ(μ)`.
pub fn mean_path_latency(spec: &LatencySpec, incidence: &IncidenceMatrix, flow: &[f64]) -> Vec<f64> {
    let q = incidence.apply(flow);
    incidence.apply_transpose(&spec.edge_means(&q))
}

/// Mean Beckmann potential `Φ(μ) = Σ_e ∫₀^{q_e} l̄_e`.
pub fn beckmann_potential(spec: &LatencySpec, incidence: &IncidenceMatrix, flow: &[f64]) -> f64 {
    spec.potential_from_edges(&incidence.apply(flow))
}

/// Exact `max_{μ∈Δ} ‖E ℓ(μ)‖`. Each path latency is convex and nonnegative in
/// `μ`, so the Euclidean norm is convex and its maximum sits at a vertex.
pub fn exact_mean_bound(
    spec: &LatencySpec,
    incidence: &IncidenceMatrix,
    network: &Network,
) -> Result<f64> {
    const MAX_VERTICES: u128 = 1 << 20;
    if network.vertex_count() > MAX_VERTICES {
        return Err(Error::config(
            "/noise/mean_bound",
            "too many all-or-nothing assignments to compute the bound; declare it explicitly",
        ));
    }
    Ok(network
        .vertices()
        .map(|v| norm(&mean_path_latency(spec, incidence, v.as_slice())))
        .fold(0.0, f64::max))
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// A mean-zero, symmetric edge-noise law.
pub trait NoiseModel: Debug + Send + Sync {
    fn name(&self) -> &'static str;

    /// Largest magnitude a draw at this scale can take.
    fn support(&self, scale: f64) -> f64;

    /// One draw conditioned on `|x| ≤ radius`. Symmetric truncation keeps the
    /// mean at exactly zero.
    fn sample(&self, scale: f64, radius: f64, rng: &mut TrialRng) -> f64;

    /// Default subgaussian parameter from the per-path lifted scales `Λᵀc`.
    fn default_sigma(&self, lifted: &[f64]) -> f64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct BoundedUniform;

impl NoiseModel for BoundedUniform {
    fn name(&self) -> &'static str {
        "bounded-uniform"
    }

    fn support(&self, scale: f64) -> f64 {
        scale
    }

    fn sample(&self, scale: f64, radius: f64, rng: &mut TrialRng) -> f64 {
        let r = scale.min(radius);
        if r <= 0.0 {
            return 0.0;
        }
        rng.random_range(-r..=r)
    }

    /// Exact support radius of `‖z‖`: every edge at `+c` maximizes every path at once.
    fn default_sigma(&self, lifted: &[f64]) -> f64 {
        norm(lifted)
    }
}

/// Gaussian with standard deviation `scale`, truncated at three deviations.
#[derive(Debug, Clone, Copy, Default)]
pub struct TruncatedGaussian;

impl NoiseModel for TruncatedGaussian {
    fn name(&self) -> &'static str {
        "truncated-gaussian"
    }

    fn support(&self, scale: f64) -> f64 {
        3.0 * scale
    }

    fn sample(&self, scale: f64, radius: f64, rng: &mut TrialRng) -> f64 {
        let r = self.support(scale).min(radius);
        if r <= 0.0 || scale <= 0.0 {
            return 0.0;
        }
        if r < 0.5 * scale {
            // narrow window: uniform proposal, acceptance >= exp(-1/8)
            loop {
                let x = rng.random_range(-r..=r);
                if rng.random::<f64>() <= (-0.5 * (x / scale).powi(2)).exp() {
                    return x;
                }
            }
        }
        loop {
            let x: f64 = scale * rng.sample::<f64, _>(StandardNormal);
            if x.abs() <= r {
                return x;
            }
        }
    }

    fn default_sigma(&self, lifted: &[f64]) -> f64 {
        let widest = lifted.iter().copied().fold(0.0, f64::max);
        2.0 * widest * (lifted.len() as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default = "NoiseConfig::default_model")]
    pub model: String,
    /// Half-width (uniform) or standard deviation (Gaussian) for every edge.
    #[serde(default = "NoiseConfig::default_scale")]
    pub scale: f64,
    #[serde(default)]
    pub edge_scales: BTreeMap<String, f64>,
    /// Declared subgaussian parameter; defaults to the model's certified value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Declared bound `L` on `‖E ℓ(μ)‖`; defaults to the exact maximum.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_bound: Option<f64>,
}

impl NoiseConfig {
    fn default_model() -> String {
        "bounded-uniform".into()
    }

    fn default_scale() -> f64 {
        0.1
    }
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            model: Self::default_model(),
            scale: Self::default_scale(),
            edge_scales: BTreeMap::new(),
            sigma: None,
            mean_bound: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NoiseSpec {
    pub model: Arc<dyn NoiseModel>,
    /// Per-edge scale in network edge order.
    pub scales: Vec<f64>,
    pub sigma: f64,
    pub mean_bound: f64,
}

impl NoiseSpec {
    pub fn kappa(&self) -> f64 {
        self.mean_bound / self.sigma
    }
}

/// One realized latency vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LatencySample {
    pub round: usize,
    pub latency: Vec<f64>,
    /// `ℓ − E ℓ(μ)`; for analysis only.
    pub noise: Vec<f64>,
}

/// Latency oracle for a fixed network. Stateless apart from the caller's rng.
#[derive(Debug, Clone)]
pub struct LatencyOracle {
    incidence: IncidenceMatrix,
    spec: LatencySpec,
    noise: NoiseSpec,
}

impl LatencyOracle {
    pub fn new(
        network: &Network,
        spec: LatencySpec,
        config: &NoiseConfig,
        model: Arc<dyn NoiseModel>,
    ) -> Result<Self> {
        let incidence = IncidenceMatrix::build(network);
        for id in config.edge_scales.keys() {
            if !network.edges().iter().any(|e| &e.id == id) {
                return Err(Error::config(
                    format!("/noise/edge_scales/{id}"),
                    "no such edge in the network",
                ));
            }
        }
        let scales: Vec<f64> = network
            .edges()
            .iter()
            .map(|e| config.edge_scales.get(&e.id).copied().unwrap_or(config.scale))
            .collect();
        if let Some(bad) = scales.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
            return Err(Error::config(
                "/noise/scale",
                format!("noise scales must be finite and >= 0, got {bad}"),
            ));
        }
        let sigma = match config.sigma {
            Some(s) if s.is_finite() && s > 0.0 => s,
            Some(s) => {
                return Err(Error::config(
                    "/noise/sigma",
                    format!("declared sigma must be positive, got {s}"),
                ))
            }
            None => {
                let s = model.default_sigma(&incidence.apply_transpose(&scales));
                if s <= 0.0 {
                    return Err(Error::config(
                        "/noise/sigma",
                        "noise is identically zero; declare a positive sigma",
                    ));
                }
                s
            }
        };
        let mean_bound = match config.mean_bound {
            Some(l) if l.is_finite() && l > 0.0 => l,
            Some(l) => {
                return Err(Error::config(
                    "/noise/mean_bound",
                    format!("declared mean bound must be positive, got {l}"),
                ))
            }
            None => exact_mean_bound(&spec, &incidence, network)?,
        };
        Ok(LatencyOracle {
            incidence,
            spec,
            noise: NoiseSpec {
                model,
                scales,
                sigma,
                mean_bound,
            },
        })
    }

    pub fn incidence(&self) -> &IncidenceMatrix {
        &self.incidence
    }

    pub fn spec(&self) -> &LatencySpec {
        &self.spec
    }

    pub fn noise(&self) -> &NoiseSpec {
        &self.noise
    }

    pub fn sigma(&self) -> f64 {
        self.noise.sigma
    }

    pub fn mean_bound(&self) -> f64 {
        self.noise.mean_bound
    }

    pub fn mean_latency(&self, flow: &[f64]) -> Vec<f64> {
        mean_path_latency(&self.spec, &self.incidence, flow)
    }

    pub fn potential(&self, flow: &[f64]) -> f64 {
        beckmann_potential(&self.spec, &self.incidence, flow)
    }

    /// Path-space noise draw at flow `μ`: each edge draws independently,
    /// truncated to half its current mean latency so latencies stay positive.
    pub fn sample_noise(&self, flow: &[f64], rng: &mut TrialRng) -> Vec<f64> {
        let q = self.incidence.apply(flow);
        let means = self.spec.edge_means(&q);
        let edge_noise: Vec<f64> = self
            .noise
            .scales
            .iter()
            .zip(&means)
            .map(|(&c, &m)| self.noise.model.sample(c, 0.5 * m, rng))
            .collect();
        self.incidence.apply_transpose(&edge_noise)
    }

    pub fn sample(&self, flow: &[f64], round: usize, rng: &mut TrialRng) -> LatencySample {
        let mean = self.mean_latency(flow);
        let noise = self.sample_noise(flow, rng);
        let latency = mean.iter().zip(&noise).map(|(m, z)| m + z).collect();
        LatencySample {
            round,
            latency,
            noise,
        }
    }
}

/// Flat Dirichlet draw per OD slice, scaled to the demand.
pub fn random_feasible_flow(network: &Network, rng: &mut TrialRng) -> PathFlow {
    let mut flow = vec![0.0; network.num_paths()];
    for od in network.od_pairs() {
        let slice = &mut flow[od.paths.clone()];
        slice.iter_mut().for_each(|x| *x = rng.sample::<f64, _>(Exp1));
        let sum: f64 = slice.iter().sum();
        slice.iter_mut().for_each(|x| *x *= od.demand / sum);
    }
    PathFlow(flow)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assumption2Report {
    pub trials: usize,
    pub sigma: f64,
    /// Smallest σ for which the sample average of `exp(‖z‖²/σ²)` is at most e.
    pub sigma_empirical: f64,
    pub mgf_estimate: f64,
    pub mean_bound: f64,
    pub mean_bound_empirical: f64,
    pub pass: bool,
}

/// Monte-Carlo check of `E[exp(‖z‖²/σ²)] ≤ e` (5% slack) and `‖E ℓ(μ)‖ ≤ L`
/// over Dirichlet-distributed flows.
pub fn check_assumption2(
    oracle: &LatencyOracle,
    network: &Network,
    trials: usize,
    rng: &mut TrialRng,
) -> Result<Assumption2Report> {
    if trials < 10_000 {
        return Err(Error::InvalidArgument(format!(
            "subgaussian check needs at least 10^4 trials, got {trials}"
        )));
    }
    let sigma = oracle.sigma();
    let mut sq_norms = Vec::with_capacity(trials);
    let mut mean_bound_empirical: f64 = 0.0;
    for _ in 0..trials {
        let flow = random_feasible_flow(network, rng);
        mean_bound_empirical = mean_bound_empirical.max(norm(&oracle.mean_latency(flow.as_slice())));
        let z = oracle.sample_noise(flow.as_slice(), rng);
        sq_norms.push(z.iter().map(|v| v * v).sum::<f64>());
    }
    let mgf = |s: f64| sq_norms.iter().map(|&r| (r / (s * s)).exp()).sum::<f64>() / trials as f64;
    let mgf_estimate = mgf(sigma);
    let max_sq = sq_norms.iter().copied().fold(0.0, f64::max);
    let sigma_empirical = if max_sq == 0.0 {
        0.0
    } else {
        let (mut lo, mut hi) = (0.0, max_sq.sqrt());
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if mid > 0.0 && mgf(mid) <= std::f64::consts::E {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    let pass = mgf_estimate <= std::f64::consts::E * 1.05
        && mean_bound_empirical <= oracle.mean_bound() * (1.0 + 1e-12);
    Ok(Assumption2Report {
        trials,
        sigma,
        sigma_empirical,
        mgf_estimate,
        mean_bound: oracle.mean_bound(),
        mean_bound_empirical,
        pass,
    })
}
