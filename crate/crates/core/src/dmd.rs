//! Delayed mirror descent: at each round the learner plays `μᵗ`, the latency
//! of that round is drawn and queued, and the learner steps on the sum of
//! whatever the calendar delivers.

use serde::{Deserialize, Serialize};

use crate::attack::DeliveryCalendar;
use crate::equilibrium::EquilibriumSolution;
use crate::error::{Error, Result};
use crate::latency::LatencyOracle;
use crate::mirror::MirrorMap;
use crate::network::{Network, PathFlow};
use crate::TrialRng;

#[derive(Debug, Clone, PartialEq)]
pub struct MirrorState {
    pub round: usize,
    pub flow: PathFlow,
    /// Accumulated dual point `ν`.
    pub dual: Vec<f64>,
    pub eta: f64,
}

impl MirrorState {
    /// State at round 1 with `ν¹ = ∇Ψ(μ¹)`.
    pub fn initial(map: &dyn MirrorMap, flow: PathFlow, eta: f64) -> Result<Self> {
        let dual = map.gradient(flow.as_slice())?;
        Ok(MirrorState {
            round: 1,
            flow,
            dual,
            eta,
        })
    }
}

/// `ℓ̄ᵗ = Σ_{τ∈D_t} ℓ^τ` together with `|D_t|`.
#[derive(Debug, Clone, PartialEq)]
pub struct BundleSum {
    pub sum: Vec<f64>,
    pub size: usize,
}

impl BundleSum {
    pub fn empty(paths: usize) -> Self {
        BundleSum {
            sum: vec![0.0; paths],
            size: 0,
        }
    }

    pub fn add(&mut self, latency: &[f64]) {
        for (s, l) in self.sum.iter_mut().zip(latency) {
            *s += l;
        }
        self.size += 1;
    }
}

/// Queues per-round latencies and releases them as anonymous sums.
#[derive(Debug)]
pub struct FeedbackChannel<'a> {
    calendar: &'a DeliveryCalendar,
    paths: usize,
    pending: Vec<Option<Vec<f64>>>,
}

impl<'a> FeedbackChannel<'a> {
    pub fn new(calendar: &'a DeliveryCalendar, paths: usize) -> Self {
        FeedbackChannel {
            calendar,
            paths,
            pending: vec![None; calendar.horizon()],
        }
    }

    pub fn submit(&mut self, round: usize, latency: Vec<f64>) {
        self.pending[round - 1] = Some(latency);
    }

    pub fn deliver(&mut self, t: usize) -> BundleSum {
        let mut bundle = BundleSum::empty(self.paths);
        for &k in self.calendar.bundle(t) {
            let latency = self.pending[k - 1]
                .take()
                .expect("calendar delivers only submitted rounds");
            bundle.add(&latency);
        }
        bundle
    }
}

/// One DMD update. An empty bundle leaves the state untouched apart from the
/// round counter.
pub fn mirror_step(
    map: &dyn MirrorMap,
    network: &Network,
    state: &MirrorState,
    bundle: &BundleSum,
) -> Result<MirrorState> {
    if bundle.sum.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("bundle latency"));
    }
    if bundle.size == 0 {
        return Ok(MirrorState {
            round: state.round + 1,
            ..state.clone()
        });
    }
    let scaled: Vec<f64> = bundle.sum.iter().map(|l| state.eta * l).collect();
    let mut flow = PathFlow(map.step(state.flow.as_slice(), &scaled)?);
    flow.renormalize(network);
    let dual = state.dual.iter().zip(&scaled).map(|(v, g)| v - g).collect();
    Ok(MirrorState {
        round: state.round + 1,
        flow,
        dual,
        eta: state.eta,
    })
}

/// `η = √(D¹ / ((σ²/σ_Ψ)·d³·(1 + ln(1/δ))·T))`.
pub fn default_learning_rate(d1: f64, sigma: f64, sigma_psi: f64, d: u32, horizon: usize, delta: f64) -> f64 {
    let d = d as f64;
    (d1 / ((sigma * sigma / sigma_psi) * d.powi(3) * (1.0 + (1.0 / delta).ln()) * horizon as f64)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EtaMode {
    /// The tuned rule with the true `D(μ*, μ¹)`.
    Default,
    /// A fixed value.
    Explicit,
    /// The tuned rule with the a-priori radius in place of `D(μ*, μ¹)`.
    Blind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EtaConfig {
    #[serde(default = "EtaConfig::default_mode")]
    pub mode: EtaMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    /// Multiplier applied after the rule.
    #[serde(default = "EtaConfig::default_scale")]
    pub scale: f64,
}

impl EtaConfig {
    fn default_mode() -> EtaMode {
        EtaMode::Default
    }

    fn default_scale() -> f64 {
        1.0
    }
}

impl Default for EtaConfig {
    fn default() -> Self {
        EtaConfig {
            mode: EtaMode::Default,
            value: None,
            scale: 1.0,
        }
    }
}

/// Inputs of the learning-rate rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaInputs {
    pub initial_divergence: f64,
    pub radius: f64,
    pub sigma: f64,
    pub sigma_psi: f64,
    pub d: u32,
    pub horizon: usize,
    pub delta: f64,
}

impl EtaConfig {
    /// Reference rate of the tuned rule, before `scale`. `None` in explicit mode.
    pub fn reference(&self, inputs: &EtaInputs) -> Option<f64> {
        let d1 = match self.mode {
            EtaMode::Default => inputs.initial_divergence,
            EtaMode::Blind => inputs.radius,
            EtaMode::Explicit => return None,
        };
        Some(default_learning_rate(
            d1,
            inputs.sigma,
            inputs.sigma_psi,
            inputs.d,
            inputs.horizon,
            inputs.delta,
        ))
    }

    pub fn resolve(&self, inputs: &EtaInputs) -> Result<f64> {
        let base = match (self.mode, self.value) {
            (EtaMode::Explicit, Some(v)) => v,
            (EtaMode::Explicit, None) => {
                return Err(Error::config("/eta/value", "explicit mode needs a value"))
            }
            _ => self.reference(inputs).unwrap_or(0.0),
        };
        let eta = base * self.scale;
        if !(eta.is_finite() && eta > 0.0) {
            let hint = if self.mode == EtaMode::Default && inputs.initial_divergence == 0.0 {
                "; the initial flow is already an equilibrium, use blind or explicit mode"
            } else {
                ""
            };
            return Err(Error::config(
                "/eta",
                format!("learning rate must be positive and finite, got {eta}{hint}"),
            ));
        }
        Ok(eta)
    }
}

/// Everything recorded about one round `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub t: usize,
    pub flow: Vec<f64>,
    pub latency: Vec<f64>,
    pub noise: Vec<f64>,
    /// `ℓ̄ᵗ`, the delivered sum.
    pub bundle: Vec<f64>,
    pub bundle_size: usize,
    pub potential: f64,
    pub gap: f64,
    /// `D(μ*, μᵗ)`.
    pub bregman_to_star: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub eta: f64,
    pub sigma_psi: f64,
    pub rounds: Vec<RoundRecord>,
    /// `μ^{T+1}`.
    pub final_flow: PathFlow,
    pub final_dual: Vec<f64>,
    pub final_bregman: f64,
    /// `μ̄ᵀ = (1/T) Σ μᵗ`.
    pub average_flow: PathFlow,
    pub average_gap: f64,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.rounds.len()
    }

    /// `μᵗ` for `t` in `1..=T+1`.
    pub fn flow(&self, t: usize) -> &[f64] {
        if t == self.rounds.len() + 1 {
            self.final_flow.as_slice()
        } else {
            &self.rounds[t - 1].flow
        }
    }

    /// `D(μ*, μᵗ)` for `t` in `1..=T+1`.
    pub fn bregman(&self, t: usize) -> f64 {
        if t == self.rounds.len() + 1 {
            self.final_bregman
        } else {
            self.rounds[t - 1].bregman_to_star
        }
    }

    pub fn gap_sum(&self) -> f64 {
        self.rounds.iter().map(|r| r.gap).sum()
    }
}

/// Fixed inputs shared by every trial of an experiment.
#[derive(Debug, Clone, Copy)]
pub struct DmdProblem<'a> {
    pub network: &'a Network,
    pub oracle: &'a LatencyOracle,
    pub map: &'a dyn MirrorMap,
    pub equilibrium: &'a EquilibriumSolution,
}

impl DmdProblem<'_> {
    pub fn bregman_to_star(&self, flow: &[f64]) -> Result<f64> {
        self.map.divergence(flow, self.equilibrium.flow.as_slice())
    }
}

pub fn run_dmd(
    problem: &DmdProblem<'_>,
    calendar: &DeliveryCalendar,
    eta: f64,
    initial: &PathFlow,
    rng: &mut TrialRng,
) -> Result<Trajectory> {
    let paths = problem.network.num_paths();
    if initial.len() != paths {
        return Err(Error::Dimension {
            expected: paths,
            actual: initial.len(),
        });
    }
    let star = problem.equilibrium.potential;
    let mut state = MirrorState::initial(problem.map, initial.clone(), eta)?;
    let mut channel = FeedbackChannel::new(calendar, paths);
    let mut rounds = Vec::with_capacity(calendar.horizon());
    let mut average = vec![0.0; paths];
    for t in 1..=calendar.horizon() {
        let flow = state.flow.0.clone();
        let sample = problem.oracle.sample(&flow, t, rng);
        channel.submit(t, sample.latency.clone());
        let bundle = channel.deliver(t);
        let potential = problem.oracle.potential(&flow);
        let bregman_to_star = problem.bregman_to_star(&flow)?;
        for (a, x) in average.iter_mut().zip(&flow) {
            *a += x;
        }
        state = mirror_step(problem.map, problem.network, &state, &bundle)?;
        rounds.push(RoundRecord {
            t,
            flow,
            latency: sample.latency,
            noise: sample.noise,
            bundle: bundle.sum,
            bundle_size: bundle.size,
            potential,
            gap: potential - star,
            bregman_to_star,
        });
    }
    let horizon = rounds.len() as f64;
    average.iter_mut().for_each(|a| *a /= horizon);
    let average_gap = problem.oracle.potential(&average) - star;
    let final_bregman = problem.bregman_to_star(state.flow.as_slice())?;
    Ok(Trajectory {
        eta,
        sigma_psi: problem.map.strong_convexity(),
        rounds,
        final_flow: state.flow,
        final_dual: state.dual,
        final_bregman,
        average_flow: PathFlow(average),
        average_gap,
    })
}
