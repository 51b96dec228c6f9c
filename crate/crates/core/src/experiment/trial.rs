use rand::SeedableRng;
use rayon::prelude::*;

use super::config::ExperimentConfig;
use crate::analysis::{theoretical_gap_bound, BoundInputs, GapBound, LemmaContext};
use crate::attack::{make_schedule, DelaySchedule, DelayStrategy, DeliveryCalendar};
use crate::dmd::{run_dmd, DmdProblem, EtaInputs, EtaMode, Trajectory};
use crate::equilibrium::{solve_mwe_frank_wolfe, EquilibriumSolution};
use crate::error::{Error, Result};
use crate::latency::{LatencyOracle, LatencySpec};
use crate::mirror::{MirrorMap, SimplexProduct};
use crate::network::{validate_flow, Network, PathFlow};
use crate::registry::Strategies;
use crate::TrialRng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output for the state `master + (index + 1)·γ`. Trial `i` of an
/// experiment seeded with `master` always gets `trial_seed(master, i)`.
pub fn trial_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent streams for the adversary and the noise of one trial.
fn trial_rngs(seed: u64) -> (TrialRng, TrialRng) {
    let noise = TrialRng::seed_from_u64(seed);
    let mut schedule = TrialRng::seed_from_u64(seed);
    schedule.set_stream(1);
    (schedule, noise)
}

/// A validated, ready-to-run experiment.
#[derive(Debug)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub network: Network,
    pub oracle: LatencyOracle,
    pub map: Box<dyn MirrorMap>,
    pub delay: Box<dyn DelayStrategy>,
    pub equilibrium: EquilibriumSolution,
    pub initial_flow: PathFlow,
    /// `D(μ*, μ¹)`.
    pub initial_divergence: f64,
    /// Learning rate of the tuned rule at `scale = 1` (blind rule in blind mode).
    pub reference_eta: f64,
    pub eta: f64,
}

pub struct TrialOutcome {
    pub index: usize,
    pub seed: u64,
    pub schedule: DelaySchedule,
    pub calendar: DeliveryCalendar,
    pub trajectory: Trajectory,
}

impl Experiment {
    pub fn build(config: ExperimentConfig, strategies: &Strategies) -> Result<Self> {
        let network = Network::from_config(&config.network)?;
        let spec = LatencySpec::from_config(&config.latency, &network)?;
        let model = strategies
            .noise_model(&config.noise.model)
            .map_err(|e| Error::config("/noise/model", e.to_string()))?;
        let oracle = LatencyOracle::new(&network, spec.clone(), &config.noise, model)?;
        let map = strategies
            .mirror_map(&config.mirror_map, &SimplexProduct::new(&network))
            .map_err(|e| Error::config("/mirror_map", e.to_string()))?;
        let delay = strategies.delay(&config.attack).map_err(|e| match e {
            Error::UnknownStrategy { .. } => Error::config("/attack/strategy", e.to_string()),
            other => other,
        })?;
        if delay.budget() as usize > config.horizon {
            return Err(Error::config(
                "/attack/d",
                format!("delay budget {} exceeds horizon {}", delay.budget(), config.horizon),
            ));
        }
        let equilibrium = solve_mwe_frank_wolfe(&spec, &network, config.equilibrium.tol, config.equilibrium.max_iters)?;
        if !equilibrium.converged {
            log::warn!(
                "equilibrium solver stopped at duality gap {:.3e} after {} iterations",
                equilibrium.duality_gap,
                equilibrium.iterations
            );
        }
        let initial_flow = match &config.initial_flow {
            None => network.uniform_flow(),
            Some(v) => {
                let flow = PathFlow(v.clone());
                let report = validate_flow(&network, &flow);
                if !report.is_ok() {
                    return Err(Error::config("/initial_flow", report.violations[0].to_string()));
                }
                flow
            }
        };
        let initial_divergence = map
            .divergence(initial_flow.as_slice(), equilibrium.flow.as_slice())
            .map_err(|e| Error::config("/initial_flow", e.to_string()))?;
        let inputs = EtaInputs {
            initial_divergence,
            radius: map.initial_radius(),
            sigma: oracle.sigma(),
            sigma_psi: map.strong_convexity(),
            d: delay.budget(),
            horizon: config.horizon,
            delta: config.delta,
        };
        let eta = config.eta.resolve(&inputs)?;
        let reference_eta = config.eta.reference(&inputs).unwrap_or(eta / config.eta.scale);
        if (delay.budget() as f64).powi(3) > config.horizon as f64 {
            log::warn!(
                "delay budget d = {} exceeds T^(1/3) for T = {}; d^(3/2)/sqrt(T) > 1",
                delay.budget(),
                config.horizon
            );
        }
        Ok(Experiment {
            config,
            network,
            oracle,
            map,
            delay,
            equilibrium,
            initial_flow,
            initial_divergence,
            reference_eta,
            eta,
        })
    }

    /// Per-iterate budget `d` requested by the adversary.
    pub fn budget(&self) -> u32 {
        self.delay.budget()
    }

    pub fn horizon(&self) -> usize {
        self.config.horizon
    }

    /// True when `d > T^{1/3}`, where the rate bound stops shrinking.
    pub fn budget_exceeds_cube_root(&self) -> bool {
        (self.budget() as f64).powi(3) > self.horizon() as f64
    }

    pub fn problem(&self) -> DmdProblem<'_> {
        DmdProblem {
            network: &self.network,
            oracle: &self.oracle,
            map: self.map.as_ref(),
            equilibrium: &self.equilibrium,
        }
    }

    pub fn lemma_context(&self) -> LemmaContext<'_> {
        LemmaContext {
            star: self.equilibrium.flow.as_slice(),
            star_potential: self.equilibrium.potential,
            mean_bound: self.oracle.mean_bound(),
            d: self.budget(),
        }
    }

    /// Divergence term fed to the bounds: the a-priori radius in blind mode,
    /// since that is what the learning rate was tuned to, else `D(μ*, μ¹)`.
    pub fn bound_divergence(&self) -> f64 {
        match self.config.eta.mode {
            EtaMode::Blind => self.map.initial_radius().max(self.initial_divergence),
            _ => self.initial_divergence,
        }
    }

    pub fn gap_bound(&self) -> Result<GapBound> {
        theoretical_gap_bound(&BoundInputs {
            d1: self.bound_divergence(),
            sigma: self.oracle.sigma(),
            sigma_psi: self.map.strong_convexity(),
            kappa: self.oracle.noise().kappa(),
            d: self.budget(),
            horizon: self.horizon(),
            eta: self.eta,
            delta: self.config.delta,
        })
    }

    pub fn seed(&self, index: usize) -> u64 {
        trial_seed(self.config.seed, index as u64)
    }

    pub fn run_trial(&self, index: usize) -> Result<TrialOutcome> {
        let seed = self.seed(index);
        let (mut schedule_rng, mut noise_rng) = trial_rngs(seed);
        let schedule = make_schedule(self.delay.as_ref(), self.horizon(), &mut schedule_rng)?;
        let calendar = DeliveryCalendar::build(&schedule);
        let trajectory = run_dmd(&self.problem(), &calendar, self.eta, &self.initial_flow, &mut noise_rng)?;
        Ok(TrialOutcome {
            index,
            seed,
            schedule,
            calendar,
            trajectory,
        })
    }

    /// Runs trials `0..n` in parallel and maps each outcome through `f`;
    /// results come back in trial order.
    pub fn map_trials<T, F>(&self, n: usize, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(TrialOutcome) -> Result<T> + Sync + Send,
    {
        (0..n)
            .into_par_iter()
            .map(|i| self.run_trial(i).and_then(&f))
            .collect()
    }
}
