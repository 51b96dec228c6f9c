use serde::Serialize;

use crate::error::{Error, Result};

const REL_TOL: f64 = 1e-12;

/// Weights `w_1..w_{T+1}` built backwards from
/// `w_{T+1} = σ_Ψ/(1296 d³σ²η²(T+1))` and
/// `w_t = w_{t+1} + 648 w_{t+1}² d³η²σ²/σ_Ψ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightSequence {
    pub horizon: usize,
    pub d: u32,
    /// Learning rate the recursion was calibrated with.
    pub eta: f64,
    pub sigma: f64,
    pub sigma_psi: f64,
    /// `weights[i] = w_{i+1}`.
    pub weights: Vec<f64>,
}

/// Outcome of checking the two induction conditions and the sandwich at a
/// learning rate `η`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightCheck {
    pub eta: f64,
    /// `A = 648 d³σ²η²(T+1)/σ_Ψ`.
    pub a: f64,
    pub monotone: bool,
    /// First `t` with `w_{t+1} + 648 w_{t+1}² d³η²σ²/σ_Ψ > w_t`.
    pub recursion_violation: Option<usize>,
    /// First `t` with `w_{t+1}η²d² > σ_Ψ/(432 dσ²)`.
    pub step_violation: Option<usize>,
    /// First `t` with `w_t` outside `[1/(2A), 1/A]`.
    pub sandwich_violation: Option<usize>,
}

impl WeightCheck {
    pub fn pass(&self) -> bool {
        self.monotone
            && self.recursion_violation.is_none()
            && self.step_violation.is_none()
            && self.sandwich_violation.is_none()
    }

    /// The first failed condition as an error, step condition first.
    pub fn into_result(self) -> Result<Self> {
        if let Some(index) = self.step_violation {
            return Err(Error::WeightCondition {
                condition: "w_{t+1} eta^2 d^2 <= sigma_psi / (432 d sigma^2)",
                index,
            });
        }
        if let Some(index) = self.recursion_violation {
            return Err(Error::WeightCondition {
                condition: "w_{t+1} + 648 w_{t+1}^2 d^3 eta^2 sigma^2 / sigma_psi <= w_t",
                index,
            });
        }
        if let Some(index) = self.sandwich_violation {
            return Err(Error::WeightCondition {
                condition: "1/(2A) <= w_t <= 1/A",
                index,
            });
        }
        if !self.monotone {
            return Err(Error::WeightCondition {
                condition: "w_t non-increasing",
                index: 0,
            });
        }
        Ok(self)
    }
}

impl WeightSequence {
    pub fn calibrated(horizon: usize, d: u32, eta: f64, sigma: f64, sigma_psi: f64) -> Result<Self> {
        if horizon == 0 || d == 0 || [eta, sigma, sigma_psi].iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "weights need positive inputs (T={horizon}, d={d}, eta={eta}, sigma={sigma}, sigma_psi={sigma_psi})"
            )));
        }
        let d3 = (d as f64).powi(3);
        let growth = 648.0 * d3 * eta * eta * sigma * sigma / sigma_psi;
        let mut weights = vec![0.0; horizon + 1];
        weights[horizon] = sigma_psi / (1296.0 * d3 * sigma * sigma * eta * eta * (horizon + 1) as f64);
        for i in (0..horizon).rev() {
            let next = weights[i + 1];
            weights[i] = next + growth * next * next;
        }
        Ok(WeightSequence {
            horizon,
            d,
            eta,
            sigma,
            sigma_psi,
            weights,
        })
    }

    /// `w_t` for `t` in `1..=T+1`.
    pub fn w(&self, t: usize) -> f64 {
        self.weights[t - 1]
    }

    /// Checks the conditions with the sequence held fixed and the learning
    /// rate set to `eta`.
    pub fn check(&self, eta: f64) -> WeightCheck {
        let d = self.d as f64;
        let s2 = self.sigma * self.sigma;
        let growth = 648.0 * d.powi(3) * eta * eta * s2 / self.sigma_psi;
        let step_cap = self.sigma_psi / (432.0 * d * s2);
        let a = 648.0 * d.powi(3) * s2 * eta * eta * (self.horizon + 1) as f64 / self.sigma_psi;
        let (lo, hi) = (1.0 / (2.0 * a), 1.0 / a);
        let monotone = self.weights.windows(2).all(|w| w[0] >= w[1]);
        let recursion_violation = (1..=self.horizon).find(|&t| {
            let next = self.w(t + 1);
            next + growth * next * next > self.w(t) * (1.0 + REL_TOL)
        });
        let step_violation = (1..=self.horizon).find(|&t| self.w(t + 1) * eta * eta * d * d > step_cap * (1.0 + REL_TOL));
        let sandwich_violation = (1..=self.horizon + 1).find(|&t| {
            let w = self.w(t);
            w < lo * (1.0 - REL_TOL) || w > hi * (1.0 + REL_TOL)
        });
        WeightCheck {
            eta,
            a,
            monotone,
            recursion_violation,
            step_violation,
            sandwich_violation,
        }
    }
}

/// Builds the sequence at `eta` and checks it at the same rate.
pub fn build_weights(horizon: usize, d: u32, eta: f64, sigma: f64, sigma_psi: f64) -> Result<(WeightSequence, WeightCheck)> {
    let seq = WeightSequence::calibrated(horizon, d, eta, sigma, sigma_psi)?;
    let check = seq.check(eta).into_result()?;
    Ok((seq, check))
}
