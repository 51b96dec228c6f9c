//! Mirror maps over the product of demand-scaled simplices, their Bregman
//! divergences and the mirror step `argmin_{μ∈Δ} ⟨μ, g⟩ + D_Ψ(μ, μᵗ)`.

use std::fmt::Debug;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::network::{Network, PathFlow};

/// Floor applied to probabilities before taking logarithms.
pub const LOG_FLOOR: f64 = 1e-300;

/// The feasible set `Δ`: one scaled simplex per OD pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexProduct {
    slices: Vec<(Range<usize>, f64)>,
    dim: usize,
}

impl SimplexProduct {
    pub fn new(network: &Network) -> Self {
        SimplexProduct {
            slices: network
                .od_pairs()
                .iter()
                .map(|w| (w.paths.clone(), w.demand))
                .collect(),
            dim: network.num_paths(),
        }
    }

    pub fn slices(&self) -> &[(Range<usize>, f64)] {
        &self.slices
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_demand(&self) -> f64 {
        self.slices.iter().map(|s| s.1).fold(0.0, f64::max)
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                actual: x.len(),
            });
        }
        Ok(())
    }
}

pub trait MirrorMap: Debug + Send + Sync {
    fn name(&self) -> &'static str;

    fn domain(&self) -> &SimplexProduct;

    /// Strong-convexity modulus w.r.t. the Euclidean norm.
    fn strong_convexity(&self) -> f64;

    fn potential(&self, flow: &[f64]) -> f64;

    fn gradient(&self, flow: &[f64]) -> Result<Vec<f64>>;

    /// `Ψ(to) − Ψ(at) − ⟨∇Ψ(at), to − at⟩`.
    fn divergence(&self, at: &[f64], to: &[f64]) -> Result<f64>;

    /// Minimizer over `Δ` of `⟨μ, step⟩ + D_Ψ(μ, current)`.
    fn step(&self, current: &[f64], step: &[f64]) -> Result<Vec<f64>>;

    /// Recovers the primal point from an accumulated dual point, when the map
    /// admits a closed form for `∇Ψ*`.
    fn primal_from_dual(&self, _dual: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// A priori bound on the divergence from the uniform start to any point of `Δ`.
    fn initial_radius(&self) -> f64;
}

/// `Bregman(at → to)`; the gradient is taken at `at`.
pub fn bregman(map: &dyn MirrorMap, at: &PathFlow, to: &PathFlow) -> Result<f64> {
    map.divergence(at.as_slice(), to.as_slice())
}

/// `Ψ(μ) = Σ_w Σ_{p∈P_w} μ_p ln(μ_p / m_w)`.
#[derive(Debug, Clone)]
pub struct Entropic {
    domain: SimplexProduct,
}

impl Entropic {
    pub fn new(domain: SimplexProduct) -> Self {
        Entropic { domain }
    }

    fn check_interior(x: &[f64]) -> Result<()> {
        match x.iter().position(|&v| !(v > 0.0)) {
            Some(index) => Err(Error::NotInterior {
                index,
                value: x[index],
            }),
            None => Ok(()),
        }
    }
}

fn xlogx_ratio(x: f64, m: f64) -> f64 {
    if x > 0.0 {
        x * (x / m).ln()
    } else {
        0.0
    }
}

impl MirrorMap for Entropic {
    fn name(&self) -> &'static str {
        "entropic"
    }

    fn domain(&self) -> &SimplexProduct {
        &self.domain
    }

    fn strong_convexity(&self) -> f64 {
        1.0 / self.domain.max_demand()
    }

    fn potential(&self, flow: &[f64]) -> f64 {
        self.domain
            .slices
            .iter()
            .map(|(r, m)| flow[r.clone()].iter().map(|&x| xlogx_ratio(x, *m)).sum::<f64>())
            .sum()
    }

    fn gradient(&self, flow: &[f64]) -> Result<Vec<f64>> {
        self.domain.check_dim(flow)?;
        Self::check_interior(flow)?;
        let mut g = vec![0.0; flow.len()];
        for (r, m) in &self.domain.slices {
            for p in r.clone() {
                g[p] = (flow[p] / m).ln() + 1.0;
            }
        }
        Ok(g)
    }

    /// Generalized KL `Σ to·ln(to/at) − to + at`, summed termwise so each term
    /// is nonnegative. `at` may vanish only where `to` does.
    fn divergence(&self, at: &[f64], to: &[f64]) -> Result<f64> {
        self.domain.check_dim(at)?;
        self.domain.check_dim(to)?;
        if let Some(index) = (0..at.len()).find(|&i| !(at[i] > 0.0) && !(to[i] == 0.0 && at[i] == 0.0)) {
            return Err(Error::NotInterior {
                index,
                value: at[index],
            });
        }
        Ok(at
            .iter()
            .zip(to)
            .map(|(&a, &b)| {
                let log_term = if b > 0.0 { b * (b / a).ln() } else { 0.0 };
                log_term - b + a
            })
            .sum::<f64>()
            .max(0.0))
    }

    /// Multiplicative weights in log space with per-OD max subtraction.
    fn step(&self, current: &[f64], step: &[f64]) -> Result<Vec<f64>> {
        self.domain.check_dim(current)?;
        self.domain.check_dim(step)?;
        let logits: Vec<f64> = current
            .iter()
            .zip(step)
            .map(|(&x, &g)| x.max(LOG_FLOOR).ln() - g)
            .collect();
        Ok(scaled_softmax(&self.domain, &logits))
    }

    fn primal_from_dual(&self, dual: &[f64]) -> Option<Vec<f64>> {
        Some(scaled_softmax(&self.domain, dual))
    }

    /// `Σ_w m_w ln|P_w|`, the largest KL from the uniform split.
    fn initial_radius(&self) -> f64 {
        self.domain
            .slices
            .iter()
            .map(|(r, m)| m * (r.len() as f64).ln())
            .sum()
    }
}

fn scaled_softmax(domain: &SimplexProduct, logits: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; logits.len()];
    for (r, m) in &domain.slices {
        let slice = &logits[r.clone()];
        let top = slice.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = slice.iter().map(|&l| (l - top).exp()).collect();
        let total: f64 = weights.iter().sum();
        for (o, w) in out[r.clone()].iter_mut().zip(&weights) {
            *o = m * w / total;
        }
    }
    out
}

/// `Ψ(μ) = ½‖μ‖²`; the step is a Euclidean projection onto each slice.
#[derive(Debug, Clone)]
pub struct Euclidean {
    domain: SimplexProduct,
}

impl Euclidean {
    pub fn new(domain: SimplexProduct) -> Self {
        Euclidean { domain }
    }
}

impl MirrorMap for Euclidean {
    fn name(&self) -> &'static str {
        "euclidean"
    }

    fn domain(&self) -> &SimplexProduct {
        &self.domain
    }

    fn strong_convexity(&self) -> f64 {
        1.0
    }

    fn potential(&self, flow: &[f64]) -> f64 {
        0.5 * flow.iter().map(|x| x * x).sum::<f64>()
    }

    fn gradient(&self, flow: &[f64]) -> Result<Vec<f64>> {
        self.domain.check_dim(flow)?;
        Ok(flow.to_vec())
    }

    fn divergence(&self, at: &[f64], to: &[f64]) -> Result<f64> {
        self.domain.check_dim(at)?;
        self.domain.check_dim(to)?;
        Ok(0.5 * at.iter().zip(to).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
    }

    fn step(&self, current: &[f64], step: &[f64]) -> Result<Vec<f64>> {
        self.domain.check_dim(current)?;
        self.domain.check_dim(step)?;
        let mut out = vec![0.0; current.len()];
        for (r, m) in &self.domain.slices {
            let shifted: Vec<f64> = r.clone().map(|p| current[p] - step[p]).collect();
            out[r.clone()].copy_from_slice(&project_simplex(&shifted, *m));
        }
        Ok(out)
    }

    /// `Σ_w ½ m_w² (1 − 1/|P_w|)`, the largest squared distance from the
    /// uniform split to a vertex.
    fn initial_radius(&self) -> f64 {
        self.domain
            .slices
            .iter()
            .map(|(r, m)| 0.5 * m * m * (1.0 - 1.0 / r.len() as f64))
            .sum()
    }
}

/// Euclidean projection of `y` onto `{x ≥ 0, Σx = mass}` (sort-based).
pub fn project_simplex(y: &[f64], mass: f64) -> Vec<f64> {
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - mass) / (j + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    y.iter().map(|&v| (v - theta).max(0.0)).collect()
}
