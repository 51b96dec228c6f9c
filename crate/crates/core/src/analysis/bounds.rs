use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundInputs {
    /// `D(μ*, μ¹)`.
    pub d1: f64,
    pub sigma: f64,
    pub sigma_psi: f64,
    /// `κ = L/σ`.
    pub kappa: f64,
    pub d: u32,
    pub horizon: usize,
    pub eta: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapBound {
    /// `A = 648 d³σ²η²(T+1)/σ_Ψ`.
    pub a: f64,
    /// `B = 2dκ² + 324d³(8 + κ²)`.
    pub b: f64,
    /// Right side of `η Σ_t (Φ(μᵗ) − Φ*) + D(μ*, μ^{T+1}) ≤ 2D¹ + 2(σ²/σ_Ψ)Bη²T + 2A ln(1/δ)`.
    pub explicit_rhs: f64,
    /// `explicit_rhs / (ηT)`, bounding the average gap and so `Φ(μ̄ᵀ) − Φ*`.
    pub avg_gap_bound: f64,
    /// Bound on `D(μ*, μ^{T+1})`.
    pub bregman_bound: f64,
    /// `K·d^{3/2}·√(σ²D¹(1 + ln(1/δ))/(σ_Ψ T))`; at the tuned learning rate it
    /// dominates `avg_gap_bound`.
    pub rate_bound: f64,
}

/// `K` in the rate form. It upper-bounds `avg_gap_bound/√(...)` at the tuned
/// rate for every `d ≥ 1` and `T ≥ 1`, so it depends on `κ` and `δ` only.
pub fn rate_constant(kappa: f64, delta: f64) -> f64 {
    let k2 = kappa * kappa;
    let log_inv = (1.0 / delta).ln();
    2.0 + (4.0 * k2 + 648.0 * (8.0 + k2) + 2592.0 * log_inv) / (1.0 + log_inv)
}

pub fn theoretical_gap_bound(inputs: &BoundInputs) -> Result<GapBound> {
    let BoundInputs {
        d1,
        sigma,
        sigma_psi,
        kappa,
        d,
        horizon,
        eta,
        delta,
    } = *inputs;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta must lie in (0, 1), got {delta}")));
    }
    if horizon == 0 || d == 0 || [sigma, sigma_psi, kappa, eta].iter().any(|v| !(*v > 0.0)) || !(d1 >= 0.0) {
        return Err(Error::InvalidArgument(format!("gap bound needs positive inputs: {inputs:?}")));
    }
    let df = d as f64;
    let t = horizon as f64;
    let s2 = sigma * sigma;
    let log_inv = (1.0 / delta).ln();
    let a = 648.0 * df.powi(3) * s2 * eta * eta * (t + 1.0) / sigma_psi;
    let b = 2.0 * df * kappa * kappa + 324.0 * df.powi(3) * (8.0 + kappa * kappa);
    let explicit_rhs = 2.0 * d1 + 2.0 * (s2 / sigma_psi) * b * eta * eta * t + 2.0 * a * log_inv;
    let rate_bound = rate_constant(kappa, delta)
        * df.powf(1.5)
        * (s2 * d1 * (1.0 + log_inv) / (sigma_psi * t)).sqrt();
    Ok(GapBound {
        a,
        b,
        explicit_rhs,
        avg_gap_bound: explicit_rhs / (eta * t),
        bregman_bound: explicit_rhs,
        rate_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dmd::default_learning_rate;

    fn inputs(d: u32, horizon: usize) -> BoundInputs {
        BoundInputs {
            d1: 1.0,
            sigma: 1.0,
            sigma_psi: 1.0,
            kappa: 1.0,
            d,
            horizon,
            eta: default_learning_rate(1.0, 1.0, 1.0, d, horizon, 0.05),
            delta: 0.05,
        }
    }

    #[test]
    fn scaling_laws() {
        let base = theoretical_gap_bound(&inputs(1, 10_000)).unwrap();
        let long = theoretical_gap_bound(&inputs(1, 40_000)).unwrap();
        assert!((base.rate_bound / long.rate_bound - 2.0).abs() < 1e-12);
        let delayed = theoretical_gap_bound(&inputs(4, 10_000)).unwrap();
        assert!((delayed.rate_bound / base.rate_bound - 8.0).abs() < 1e-12);
    }

    #[test]
    fn plug_in_value() {
        // independent arithmetic for D¹ = σ = σ_Ψ = κ = d = 1, δ = 0.05, T = 10⁴
        let l = 20f64.ln();
        let eta = (1.0 / ((1.0 + l) * 1e4)).sqrt();
        let a = 648.0 * eta * eta * 10_001.0;
        let b = 2.0 + 324.0 * 9.0;
        let rhs = 2.0 + 2.0 * b * eta * eta * 1e4 + 2.0 * a * l;
        let got = theoretical_gap_bound(&inputs(1, 10_000)).unwrap();
        assert!((got.explicit_rhs - rhs).abs() < 1e-9 * rhs);
        assert!((got.avg_gap_bound - rhs / (eta * 1e4)).abs() < 1e-9 * rhs);
        assert!((got.explicit_rhs - 2.0 - 5836.0 / (1.0 + l) - 1296.0 * 1.0001 * l / (1.0 + l)).abs() < 1e-9);
    }

    #[test]
    fn rate_form_dominates_at_tuned_rate() {
        for d in [1, 2, 4, 8, 16] {
            for horizon in [1, 10, 256, 8192] {
                for kappa in [0.1, 1.0, 5.0] {
                    let mut i = inputs(d, horizon);
                    i.kappa = kappa;
                    let g = theoretical_gap_bound(&i).unwrap();
                    assert!(g.avg_gap_bound <= g.rate_bound * (1.0 + 1e-12));
                }
            }
        }
    }

    #[test]
    fn rejects_bad_delta() {
        let mut i = inputs(1, 10);
        i.delta = 1.0;
        assert!(theoretical_gap_bound(&i).is_err());
    }
}
