//! The four subcommands. Each writes its artifacts plus `config.json` and
//! `manifest.json` into the output directory and returns a pass/fail status;
//! configuration problems come back as `Err`.

use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{ExperimentConfig, Override};
use super::output::{fmt_f64, samples_csv, schedule_csv, trajectory_csv, ArtifactWriter, CsvTable, RunManifest};
use super::trial::Experiment;
use crate::analysis::{
    check_chainsum, check_lemma1, estimate_wanes, fit_rate, holds, quartiles, validate_grid, GapBound, RateFit,
    ResilienceEstimate, Summary, WeightCheck, WeightSequence, MIN_TRIALS,
};
use crate::equilibrium::EquilibriumSolution;
use crate::error::{Error, Result};
use crate::network::PathFlow;
use crate::registry::Strategies;

/// A loaded config together with where its artifacts go.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub config: ExperimentConfig,
    /// Rendered `KEY=VALUE` overrides, in the order applied.
    pub overrides: Vec<String>,
    pub out_dir: PathBuf,
}

impl Invocation {
    /// Loads `path`, applies the overrides and picks the output directory:
    /// `out`, then the config's `output_dir`, then `./out`.
    pub fn load(path: &Path, overrides: &[Override], out: Option<PathBuf>) -> Result<Self> {
        let config = ExperimentConfig::load(path, overrides)?;
        Ok(Self::new(config, overrides, out))
    }

    pub fn new(config: ExperimentConfig, overrides: &[Override], out: Option<PathBuf>) -> Self {
        let out_dir = out
            .or_else(|| config.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        Invocation {
            config,
            overrides: overrides.iter().map(Override::render).collect(),
            out_dir,
        }
    }

    fn writer(&self) -> Result<ArtifactWriter> {
        let mut writer = ArtifactWriter::create(&self.out_dir)?;
        writer.write("config.json", self.config_json().as_bytes())?;
        Ok(writer)
    }

    fn config_json(&self) -> String {
        let mut text = self.config.to_json();
        text.push('\n');
        text
    }

    fn manifest(&self, command: &str, trial_seeds: Vec<u64>) -> RunManifest {
        RunManifest::new(
            command,
            &self.config_json(),
            self.config.seed,
            trial_seeds,
            self.overrides.clone(),
        )
    }
}

/// Outcome of a command that ran to completion.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandStatus {
    pub pass: bool,
    /// Human-readable summary lines.
    pub lines: Vec<String>,
    pub manifest: RunManifest,
}

#[derive(Debug, Clone, Serialize)]
struct RunMetadata {
    eta: f64,
    reference_eta: f64,
    sigma: f64,
    sigma_psi: f64,
    kappa: f64,
    mean_bound: f64,
    d: u32,
    horizon: usize,
    delta: f64,
    mirror_map: String,
    delay_strategy: String,
    master_seed: u64,
    trial_seed: u64,
    initial_divergence: f64,
    total_budget: u64,
    bound: GapBound,
}

#[derive(Debug, Clone, Serialize)]
struct RunSolution<'a> {
    equilibrium: &'a EquilibriumSolution,
    final_flow: &'a PathFlow,
    average_flow: &'a PathFlow,
    average_gap: f64,
    final_bregman: f64,
    gap_sum: f64,
}

/// One seeded trial: trajectory, schedule and solution.
pub fn cmd_run(inv: &Invocation, strategies: &Strategies) -> Result<CommandStatus> {
    let exp = Experiment::build(inv.config.clone(), strategies)?;
    let outcome = exp.run_trial(0)?;
    let bound = exp.gap_bound()?;
    let traj = &outcome.trajectory;
    let mut writer = inv.writer()?;
    writer.write_csv("trajectory.csv", trajectory_csv(&exp.network, &outcome))?;
    writer.write_csv("schedule.csv", schedule_csv(&outcome))?;
    if inv.config.record_samples {
        writer.write_csv("samples.csv", samples_csv(&exp.network, &outcome))?;
    }
    writer.write_json(
        "solution.json",
        &RunSolution {
            equilibrium: &exp.equilibrium,
            final_flow: &traj.final_flow,
            average_flow: &traj.average_flow,
            average_gap: traj.average_gap,
            final_bregman: traj.final_bregman,
            gap_sum: traj.gap_sum(),
        },
    )?;
    writer.write_json(
        "run.json",
        &RunMetadata {
            eta: exp.eta,
            reference_eta: exp.reference_eta,
            sigma: exp.oracle.sigma(),
            sigma_psi: exp.map.strong_convexity(),
            kappa: exp.oracle.noise().kappa(),
            mean_bound: exp.oracle.mean_bound(),
            d: exp.budget(),
            horizon: exp.horizon(),
            delta: inv.config.delta,
            mirror_map: exp.map.name().to_string(),
            delay_strategy: exp.delay.name().to_string(),
            master_seed: inv.config.seed,
            trial_seed: outcome.seed,
            initial_divergence: exp.initial_divergence,
            total_budget: outcome.schedule.total_budget(),
            bound,
        },
    )?;
    let manifest = writer.finish(inv.manifest("run", vec![outcome.seed]))?;
    Ok(CommandStatus {
        pass: true,
        lines: vec![format!(
            "run: T={} d={} eta={:.6e} average gap {:.6e} (rate bound {:.6e})",
            exp.horizon(),
            exp.budget(),
            exp.eta,
            traj.average_gap,
            bound.rate_bound
        )],
        manifest,
    })
}

#[derive(Debug, Clone, Serialize)]
struct TrialVerdict {
    trial: usize,
    seed: u64,
    lemma_rounds: usize,
    lemma_violations: usize,
    first_lemma_violation: Option<usize>,
    chainsum_violations: usize,
    first_chainsum_violation: Option<usize>,
    /// `η Σ_t gap_t + D(μ*, μ^{T+1})`.
    bound_lhs: f64,
    bound_pass: bool,
}

#[derive(Debug, Clone, Serialize)]
struct VerifyReport {
    pass: bool,
    eta: f64,
    reference_eta: f64,
    weights: WeightCheck,
    trials: usize,
    lemma_round_checks: usize,
    lemma_violations: usize,
    chainsum_violations: usize,
    bound: Option<GapBound>,
    bound_violations: usize,
    bound_violation_rate: f64,
    delta: f64,
    first_failure: Option<(u64, usize)>,
}

fn weight_failure(check: &WeightCheck) -> Option<String> {
    match check.clone().into_result() {
        Ok(_) => None,
        Err(Error::WeightCondition { condition, index }) => {
            Some(format!("weight condition `{condition}` fails at t={index}"))
        }
        Err(other) => Some(other.to_string()),
    }
}

/// Weight conditions, then per-round certificates and the explicit bound
/// over `config.trials` seeded trials.
pub fn cmd_verify(inv: &Invocation, strategies: &Strategies) -> Result<CommandStatus> {
    let exp = Experiment::build(inv.config.clone(), strategies)?;
    let n = inv.config.trials;
    let weights = WeightSequence::calibrated(
        exp.horizon(),
        exp.budget(),
        exp.reference_eta,
        exp.oracle.sigma(),
        exp.map.strong_convexity(),
    )?
    .check(exp.eta);
    let mut writer = inv.writer()?;
    let mut report = VerifyReport {
        pass: false,
        eta: exp.eta,
        reference_eta: exp.reference_eta,
        weights: weights.clone(),
        trials: n,
        lemma_round_checks: 0,
        lemma_violations: 0,
        chainsum_violations: 0,
        bound: None,
        bound_violations: 0,
        bound_violation_rate: 0.0,
        delta: inv.config.delta,
        first_failure: None,
    };
    if let Some(message) = weight_failure(&weights) {
        writer.write_json("verify.json", &report)?;
        let manifest = writer.finish(inv.manifest("verify", Vec::new()))?;
        return Ok(CommandStatus {
            pass: false,
            lines: vec![format!("verify: FAIL {message} (eta={:.6e})", exp.eta)],
            manifest,
        });
    }

    let bound = exp.gap_bound()?;
    let ctx = exp.lemma_context();
    let verdicts = exp.map_trials(n, |o| {
        let lemma = check_lemma1(&o.trajectory, &o.calendar, &ctx)?;
        let chain = check_chainsum(&o.trajectory, &o.calendar, &ctx)?;
        let bound_lhs = o.trajectory.eta * o.trajectory.gap_sum() + o.trajectory.final_bregman;
        Ok(TrialVerdict {
            trial: o.index,
            seed: o.seed,
            lemma_rounds: lemma.len(),
            lemma_violations: lemma.iter().filter(|c| !c.pass).count(),
            first_lemma_violation: lemma.iter().find(|c| !c.pass).map(|c| c.t),
            chainsum_violations: chain.iter().filter(|c| !c.pass).count(),
            first_chainsum_violation: chain.iter().find(|c| !c.pass).map(|c| c.t),
            bound_lhs,
            bound_pass: holds(bound_lhs, bound.explicit_rhs),
        })
    })?;

    let mut table = CsvTable::new(&[
        "trial",
        "seed",
        "lemma_rounds",
        "lemma_violations",
        "first_lemma_violation",
        "chainsum_violations",
        "first_chainsum_violation",
        "bound_lhs",
        "bound_rhs",
        "bound_pass",
    ]);
    let opt = |t: Option<usize>| t.map(|t| t.to_string()).unwrap_or_default();
    for v in &verdicts {
        table.row(vec![
            v.trial.to_string(),
            v.seed.to_string(),
            v.lemma_rounds.to_string(),
            v.lemma_violations.to_string(),
            opt(v.first_lemma_violation),
            v.chainsum_violations.to_string(),
            opt(v.first_chainsum_violation),
            fmt_f64(v.bound_lhs),
            fmt_f64(bound.explicit_rhs),
            v.bound_pass.to_string(),
        ]);
    }
    writer.write_csv("certificates.csv", table)?;

    report.lemma_round_checks = verdicts.iter().map(|v| v.lemma_rounds).sum();
    report.lemma_violations = verdicts.iter().map(|v| v.lemma_violations).sum();
    report.chainsum_violations = verdicts.iter().map(|v| v.chainsum_violations).sum();
    report.bound_violations = verdicts.iter().filter(|v| !v.bound_pass).count();
    report.bound_violation_rate = report.bound_violations as f64 / n.max(1) as f64;
    report.bound = Some(bound);
    report.first_failure = verdicts.iter().find_map(|v| {
        let t = match (v.first_lemma_violation, v.first_chainsum_violation) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        t.map(|t| (v.seed, t))
    });
    report.pass = report.lemma_violations == 0
        && report.chainsum_violations == 0
        && report.bound_violation_rate <= inv.config.delta;
    writer.write_json("verify.json", &report)?;
    let seeds = verdicts.iter().map(|v| v.seed).collect();
    let manifest = writer.finish(inv.manifest("verify", seeds))?;

    let mut lines = vec![format!(
        "verify: {} trials, {} round checks, {} lemma violations, {} chain-sum violations, bound violation rate {:.4} (delta {})",
        n,
        report.lemma_round_checks,
        report.lemma_violations,
        report.chainsum_violations,
        report.bound_violation_rate,
        inv.config.delta
    )];
    if let Some((seed, t)) = report.first_failure {
        lines.push(format!("verify: FAIL first failing certificate at seed={seed} t={t}"));
    } else if !report.pass {
        lines.push("verify: FAIL bound violation rate exceeds delta".to_string());
    }
    Ok(CommandStatus {
        pass: report.pass,
        lines,
        manifest,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SweepAxis {
    #[serde(rename = "T")]
    Horizon,
    #[serde(rename = "d")]
    Budget,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "T" | "t" => Ok(SweepAxis::Horizon),
            "d" => Ok(SweepAxis::Budget),
            other => Err(Error::InvalidArgument(format!("unknown sweep axis `{other}` (expected T or d)"))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct SweepPoint {
    value: u64,
    horizon: usize,
    d: u32,
    eta: f64,
    summary: Summary,
    rate_bound: f64,
    avg_gap_bound: f64,
    within_bound: bool,
}

#[derive(Debug, Clone, Serialize)]
struct SweepReport {
    axis: SweepAxis,
    trials: usize,
    points: Vec<SweepPoint>,
    fit: Option<RateFit>,
    /// Median gap non-decreasing along the grid (budget axis only).
    monotone: Option<bool>,
    all_within_bound: bool,
    pass: bool,
}

/// Runs `config.trials` seeds at every grid value. The horizon axis fits the
/// log-log rate; the budget axis checks monotonicity in `d`.
pub fn cmd_sweep(
    inv: &Invocation,
    strategies: &Strategies,
    axis: SweepAxis,
    grid: Option<Vec<u64>>,
) -> Result<CommandStatus> {
    let cfg = &inv.config;
    let grid: Vec<u64> = match (grid, axis) {
        (Some(g), _) => g,
        (None, SweepAxis::Horizon) => cfg.sweep.horizons.iter().map(|&t| t as u64).collect(),
        (None, SweepAxis::Budget) => cfg.sweep.budgets.iter().map(|&d| d as u64).collect(),
    };
    if grid.is_empty() {
        return Err(Error::InvalidArgument("sweep grid is empty".into()));
    }
    let configs: Vec<ExperimentConfig> = match axis {
        SweepAxis::Horizon => {
            let horizons: Vec<usize> = grid.iter().map(|&t| t as usize).collect();
            validate_grid(&horizons)?;
            horizons
                .iter()
                .map(|&horizon| ExperimentConfig { horizon, ..cfg.clone() })
                .collect()
        }
        SweepAxis::Budget => grid
            .iter()
            .map(|&d| {
                let d = u32::try_from(d)
                    .ok()
                    .filter(|&d| d >= 1)
                    .ok_or_else(|| Error::InvalidArgument(format!("budget {d} out of range")))?;
                Ok(ExperimentConfig {
                    attack: cfg.attack.with_budget(d),
                    ..cfg.clone()
                })
            })
            .collect::<Result<_>>()?,
    };
    // build everything first so config errors surface before any trial runs
    let experiments: Vec<Experiment> = configs
        .into_iter()
        .map(|c| Experiment::build(c, strategies))
        .collect::<Result<_>>()?;

    let n = cfg.trials;
    let mut cells = CsvTable::new(&["seed", "T", "d", "gap", "bound", "pass"]);
    let mut summary = CsvTable::new(&["value", "median_gap", "q25", "q75", "bound"]);
    let mut points = Vec::new();
    let mut all_gaps = Vec::new();
    for (value, exp) in grid.iter().zip(&experiments) {
        let gaps = exp.map_trials(n, |o| Ok((o.seed, o.trajectory.average_gap)))?;
        let bound = exp.gap_bound()?;
        for &(seed, gap) in &gaps {
            cells.row(vec![
                seed.to_string(),
                exp.horizon().to_string(),
                exp.budget().to_string(),
                fmt_f64(gap),
                fmt_f64(bound.rate_bound),
                (gap <= bound.rate_bound).to_string(),
            ]);
        }
        let values: Vec<f64> = gaps.iter().map(|g| g.1).collect();
        let stats = quartiles(&values);
        summary.row(vec![
            value.to_string(),
            fmt_f64(stats.median),
            fmt_f64(stats.q25),
            fmt_f64(stats.q75),
            fmt_f64(bound.rate_bound),
        ]);
        points.push(SweepPoint {
            value: *value,
            horizon: exp.horizon(),
            d: exp.budget(),
            eta: exp.eta,
            summary: stats,
            rate_bound: bound.rate_bound,
            avg_gap_bound: bound.avg_gap_bound,
            within_bound: stats.median <= bound.rate_bound,
        });
        all_gaps.push(values);
    }

    let fit = match axis {
        SweepAxis::Horizon => {
            let horizons: Vec<usize> = points.iter().map(|p| p.horizon).collect();
            Some(fit_rate(&horizons, &all_gaps)?)
        }
        SweepAxis::Budget => None,
    };
    let monotone = match axis {
        SweepAxis::Budget => Some(points.windows(2).all(|w| w[0].summary.median <= w[1].summary.median)),
        SweepAxis::Horizon => None,
    };
    let all_within_bound = points.iter().all(|p| p.within_bound);
    let pass = all_within_bound && monotone.unwrap_or(true);
    let report = SweepReport {
        axis,
        trials: n,
        points,
        fit,
        monotone,
        all_within_bound,
        pass,
    };

    let mut writer = inv.writer()?;
    writer.write_csv("sweep.csv", summary)?;
    writer.write_csv("cells.csv", cells)?;
    writer.write_json("sweep.json", &report)?;
    let seeds = (0..n).map(|i| experiments[0].seed(i)).collect();
    let manifest = writer.finish(inv.manifest("sweep", seeds))?;

    let mut lines: Vec<String> = report
        .points
        .iter()
        .map(|p| {
            format!(
                "sweep: T={} d={} median gap {:.6e} [q25 {:.6e}, q75 {:.6e}] rate bound {:.6e}",
                p.horizon, p.d, p.summary.median, p.summary.q25, p.summary.q75, p.rate_bound
            )
        })
        .collect();
    if let Some(fit) = &report.fit {
        lines.push(format!("sweep: slope {:.4} (stderr {:.4})", fit.slope, fit.stderr));
    }
    if report.monotone == Some(false) {
        lines.push("sweep: FAIL median gap decreases along the budget grid".into());
    }
    if !all_within_bound {
        lines.push("sweep: FAIL a median gap exceeds its rate bound".into());
    }
    Ok(CommandStatus { pass, lines, manifest })
}

/// Where the target gap of a resilience estimate comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsilonMode {
    /// The rate-form bound of the experiment.
    Theoretical,
    Explicit(f64),
}

impl std::str::FromStr for EpsilonMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "theoretical" {
            return Ok(EpsilonMode::Theoretical);
        }
        s.parse::<f64>()
            .map(EpsilonMode::Explicit)
            .map_err(|_| Error::InvalidArgument(format!("epsilon must be `theoretical` or a number, got `{s}`")))
    }
}

/// Estimates `P(Φ(μ̄ᵀ) − Φ* < ε)` over `config.trials` seeds. Without an
/// explicit mode, `config.wanes.epsilon` is used when set.
pub fn cmd_wanes(inv: &Invocation, strategies: &Strategies, mode: Option<EpsilonMode>) -> Result<CommandStatus> {
    let cfg = &inv.config;
    if cfg.trials < MIN_TRIALS {
        return Err(Error::config(
            "/trials",
            format!("resilience estimate needs at least {MIN_TRIALS} trials, got {}", cfg.trials),
        ));
    }
    let mode = mode.unwrap_or(match cfg.wanes.epsilon {
        Some(e) => EpsilonMode::Explicit(e),
        None => EpsilonMode::Theoretical,
    });
    let exp = Experiment::build(cfg.clone(), strategies)?;
    let bound = exp.gap_bound()?;
    let epsilon = match mode {
        EpsilonMode::Theoretical => bound.rate_bound,
        EpsilonMode::Explicit(e) => e,
    };
    let gaps = exp.map_trials(cfg.trials, |o| Ok((o.seed, o.trajectory.average_gap)))?;
    let values: Vec<f64> = gaps.iter().map(|g| g.1).collect();
    let estimate = ResilienceEstimate {
        theoretical_epsilon: Some(bound.rate_bound),
        ..estimate_wanes(&values, epsilon, cfg.delta)?
    };

    let mut table = CsvTable::new(&["trial", "seed", "average_gap", "success"]);
    for (i, &(seed, gap)) in gaps.iter().enumerate() {
        table.row(vec![
            i.to_string(),
            seed.to_string(),
            fmt_f64(gap),
            (gap < epsilon).to_string(),
        ]);
    }
    let mut writer = inv.writer()?;
    writer.write_csv("gaps.csv", table)?;
    writer.write_json("wanes.json", &estimate)?;
    let manifest = writer.finish(inv.manifest("wanes", gaps.iter().map(|g| g.0).collect()))?;
    let lines = vec![format!(
        "wanes: {}: {}/{} trials below epsilon={:.6e}, P={:.4} CI95=[{:.4}, {:.4}], target {:.4}",
        if estimate.pass { "PASS" } else { "FAIL" },
        estimate.successes,
        estimate.trials,
        epsilon,
        estimate.probability,
        estimate.ci_low,
        estimate.ci_high,
        1.0 - cfg.delta
    )];
    Ok(CommandStatus {
        pass: estimate.pass,
        lines,
        manifest,
    })
}
