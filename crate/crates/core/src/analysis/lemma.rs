use serde::Serialize;

use super::holds;
use crate::attack::DeliveryCalendar;
use crate::dmd::Trajectory;
use crate::error::{Error, Result};
use crate::latency::norm;

/// Ground truth the verifier compares a trajectory against.
#[derive(Debug, Clone, Copy)]
pub struct LemmaContext<'a> {
    pub star: &'a [f64],
    pub star_potential: f64,
    /// `L`, the bound on `‖E ℓ(μ)‖`.
    pub mean_bound: f64,
    /// Per-iterate budget `d`.
    pub d: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerRoundCertificate {
    pub t: usize,
    pub lhs: f64,
    pub rhs: f64,
    /// `ξ_τ = η⟨z^τ, μ* − μ^τ⟩` for `τ ∈ D_t`, ascending in `τ`.
    pub xi: Vec<f64>,
    /// `‖z_m‖`, the largest noise norm over the window `∪_{s=τ_t}^t D_s`.
    pub z_max: f64,
    pub pass: bool,
}

fn window_noise_max(trajectory: &Trajectory, calendar: &DeliveryCalendar, t: usize) -> f64 {
    calendar
        .window(t)
        .map(|r| norm(&trajectory.rounds[r - 1].noise))
        .fold(0.0, f64::max)
}

fn check_inputs(trajectory: &Trajectory, calendar: &DeliveryCalendar) -> Result<()> {
    if trajectory.horizon() != calendar.horizon() {
        return Err(Error::InvalidArgument(format!(
            "trajectory has {} rounds but the calendar has {}",
            trajectory.horizon(),
            calendar.horizon()
        )));
    }
    let paths = trajectory.final_flow.len();
    if let Some(r) = trajectory.rounds.iter().find(|r| r.noise.len() != paths) {
        return Err(Error::InvalidArgument(format!("round {} has no noise record", r.t)));
    }
    Ok(())
}

/// Evaluates, for every round with a nonempty bundle,
///
/// `Σ_{τ∈D_t} η(Φ^τ − Φ*) − 2η²dL²/σ_Ψ + D(μ*, μ^{t+1}) − D(μ*, μᵗ)
///     ≤ Σ_{τ∈D_t} ξ_τ + (2η²d/σ_Ψ)‖z_m‖²`.
///
/// Rounds with `D_t = ∅` are skipped.
pub fn check_lemma1(
    trajectory: &Trajectory,
    calendar: &DeliveryCalendar,
    ctx: &LemmaContext<'_>,
) -> Result<Vec<PerRoundCertificate>> {
    check_inputs(trajectory, calendar)?;
    let eta = trajectory.eta;
    let sigma_psi = trajectory.sigma_psi;
    let d = ctx.d as f64;
    let mut out = Vec::new();
    for t in 1..=calendar.horizon() {
        let bundle = calendar.bundle(t);
        if bundle.is_empty() {
            continue;
        }
        let mut gap_sum = 0.0;
        let mut xi = Vec::with_capacity(bundle.len());
        for &tau in bundle {
            let round = &trajectory.rounds[tau - 1];
            gap_sum += eta * (round.potential - ctx.star_potential);
            let inner: f64 = round
                .noise
                .iter()
                .zip(ctx.star.iter().zip(&round.flow))
                .map(|(z, (s, m))| z * (s - m))
                .sum();
            xi.push(eta * inner);
        }
        let z_max = window_noise_max(trajectory, calendar, t);
        let lhs = gap_sum - 2.0 * eta * eta * d * ctx.mean_bound.powi(2) / sigma_psi
            + trajectory.bregman(t + 1)
            - trajectory.bregman(t);
        let rhs = xi.iter().sum::<f64>() + 2.0 * eta * eta * d / sigma_psi * z_max * z_max;
        out.push(PerRoundCertificate {
            t,
            lhs,
            rhs,
            xi,
            z_max,
            pass: holds(lhs, rhs),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainSumCheck {
    pub t: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// `Σ_{τ∈D_t} η‖μ* − μ^τ‖ ≤ √(2d²η²D(μ*, μᵗ)/σ_Ψ) + (2d²η²/σ_Ψ)(L + ‖z_m‖)`
/// for every round; empty bundles pass trivially.
pub fn check_chainsum(
    trajectory: &Trajectory,
    calendar: &DeliveryCalendar,
    ctx: &LemmaContext<'_>,
) -> Result<Vec<ChainSumCheck>> {
    check_inputs(trajectory, calendar)?;
    let eta = trajectory.eta;
    let sigma_psi = trajectory.sigma_psi;
    let d = ctx.d as f64;
    Ok((1..=calendar.horizon())
        .map(|t| {
            let lhs: f64 = calendar
                .bundle(t)
                .iter()
                .map(|&tau| {
                    let flow = &trajectory.rounds[tau - 1].flow;
                    let diff: Vec<f64> = ctx.star.iter().zip(flow).map(|(s, m)| s - m).collect();
                    eta * norm(&diff)
                })
                .sum();
            let z_max = window_noise_max(trajectory, calendar, t);
            let scale = 2.0 * d * d * eta * eta / sigma_psi;
            let rhs = (scale * trajectory.bregman(t)).sqrt() + scale * (ctx.mean_bound + z_max);
            ChainSumCheck {
                t,
                lhs,
                rhs,
                pass: holds(lhs, rhs),
            }
        })
        .collect())
}
