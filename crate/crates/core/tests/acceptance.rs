//! Acceptance suite. Each criterion prints one PASS/FAIL line; the process
//! exits nonzero if any criterion fails.

use std::path::{Path, PathBuf};
use std::time::Instant;

use dmd_bench::analysis::{
    admissible_lambdas, check_chainsum, check_lemma1, check_max_mgf, fit_rate, quartiles, WeightSequence,
    INEQUALITY_SLACK,
};
use dmd_bench::attack::{audit_calendar, AttackConfig, DelaySchedule, DeliveryCalendar};
use dmd_bench::dmd::{mirror_step, BundleSum, EtaConfig, EtaMode, MirrorState};
use dmd_bench::equilibrium::{solve_mwe_frank_wolfe, solve_mwe_grid, wardrop_residual};
use dmd_bench::experiment::{cmd_run, Experiment, ExperimentConfig, Invocation};
use dmd_bench::instances;
use dmd_bench::latency::{check_assumption2, random_feasible_flow, LatencyConfig, LatencySpec};
use dmd_bench::mirror::{Entropic, Euclidean, MirrorMap, SimplexProduct};
use dmd_bench::network::{IncidenceMatrix, Network};
use dmd_bench::registry::Strategies;
use dmd_bench::TrialRng;
use rand::{Rng, SeedableRng};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const RATE_GRID: [usize; 6] = [256, 512, 1024, 2048, 4096, 8192];
const SLOPE_BAND: (f64, f64) = (-0.65, -0.35);

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// The shipped diamond config: the dominated instance, whose equilibrium is
/// a vertex away from the uniform start.
fn diamond() -> ExperimentConfig {
    ExperimentConfig::load(&configs_dir().join("diamond.json"), &[]).expect("shipped config loads")
}

fn with(horizon: usize, trials: usize, attack: AttackConfig) -> ExperimentConfig {
    ExperimentConfig {
        horizon,
        trials,
        attack,
        ..diamond()
    }
}

fn build(config: ExperimentConfig) -> Result<Experiment, String> {
    Experiment::build(config, &Strategies::builtin()).map_err(|e| e.to_string())
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn lemma_suite() -> Outcome {
    let attacks = [
        AttackConfig::none(),
        AttackConfig::constant(3),
        AttackConfig::uniform_random(4),
        AttackConfig::burst(50, 20, 8),
    ];
    let mut configs: Vec<ExperimentConfig> = attacks.iter().map(|a| with(200, 100, a.clone())).collect();
    // the asymmetric instance starts at its equilibrium and needs the blind rate
    for a in &attacks {
        let mut c = with(200, 100, a.clone());
        c.latency = instances::diamond_asymmetric_latency();
        c.eta = EtaConfig {
            mode: EtaMode::Blind,
            ..EtaConfig::default()
        };
        configs.push(c);
    }
    let (mut checks, mut violations, mut chain_violations) = (0, 0, 0);
    for config in configs {
        let strategy = config.attack.strategy.clone();
        let exp = build(config)?;
        let ctx = exp.lemma_context();
        let per_trial = exp
            .map_trials(100, |o| {
                let lemma = check_lemma1(&o.trajectory, &o.calendar, &ctx)?;
                let chain = check_chainsum(&o.trajectory, &o.calendar, &ctx)?;
                let first = lemma.iter().find(|c| !c.pass).map(|c| (o.seed, c.t));
                Ok((
                    lemma.len(),
                    lemma.iter().filter(|c| !c.pass).count(),
                    chain.iter().filter(|c| !c.pass).count(),
                    first,
                ))
            })
            .map_err(|e| e.to_string())?;
        for (n, bad, chain_bad, first) in per_trial {
            checks += n;
            violations += bad;
            chain_violations += chain_bad;
            if let Some((seed, t)) = first {
                return Err(format!("{strategy}: violation at seed={seed} t={t}"));
            }
        }
    }
    ensure(violations == 0 && chain_violations == 0, || {
        format!("{violations} lemma and {chain_violations} chain-sum violations")
    })?;
    ensure(checks >= 20_000, || format!("only {checks} round checks"))?;
    Ok(format!("{checks} round checks, 0 violations, 0 chain-sum violations"))
}

fn calendar_fuzz() -> Outcome {
    let mut rng = TrialRng::seed_from_u64(2);
    for i in 0..1000 {
        let horizon = rng.random_range(1..=64);
        let d: u32 = rng.random_range(1..=16);
        let raw: Vec<u32> = (0..horizon).map(|_| rng.random_range(1..=d)).collect();
        let schedule = DelaySchedule::new(raw).map_err(|e| e.to_string())?;
        let calendar = DeliveryCalendar::build(&schedule);
        audit_calendar(&schedule, &calendar).map_err(|e| format!("schedule {i}: {e}"))?;
    }
    Ok("1000 schedules, 0 failures".into())
}

fn equilibrium_oracle() -> Outcome {
    let cases: [(&str, Network, LatencyConfig); 4] = [
        ("diamond symmetric", instances::diamond_network(1.0), instances::diamond_symmetric_latency()),
        ("diamond asymmetric", instances::diamond_network(1.0), instances::diamond_asymmetric_latency()),
        ("diamond dominated", instances::diamond_network(1.0), instances::diamond_dominated_latency()),
        ("braess", instances::braess_network(1.0), instances::braess_latency()),
    ];
    let mut worst: f64 = 0.0;
    for (name, net, latency) in &cases {
        let spec = LatencySpec::from_config(latency, net).map_err(|e| e.to_string())?;
        let fw = solve_mwe_frank_wolfe(&spec, net, 1e-10, 100_000).map_err(|e| e.to_string())?;
        let grid = solve_mwe_grid(&spec, net, 1e-3).map_err(|e| e.to_string())?;
        let diff = (fw.potential - grid.potential).abs();
        worst = worst.max(diff);
        ensure(diff <= 1e-3, || format!("{name}: FW {} vs grid {}", fw.potential, grid.potential))?;
        let residual = wardrop_residual(&spec, net, &fw.flow);
        ensure(residual <= 1e-5, || format!("{name}: residual {residual:e}"))?;
        if *name == "diamond symmetric" {
            let ok = (fw.flow.0[0] - 0.5).abs() <= 1e-6
                && (fw.flow.0[1] - 0.5).abs() <= 1e-6
                && (fw.potential - 0.5).abs() <= 1e-6;
            ensure(ok, || format!("symmetric: mu*={:?}, phi*={}", fw.flow.0, fw.potential))?;
        }
    }
    Ok(format!("max |FW - grid| = {worst:.2e}"))
}

/// Average gaps over `trials` seeds at every horizon of the rate grid,
/// together with the rate bound of each cell.
fn rate_sweep(attack: AttackConfig, trials: usize) -> Result<(Vec<Vec<f64>>, Vec<f64>), String> {
    let mut gaps = Vec::new();
    let mut bounds = Vec::new();
    for &horizon in &RATE_GRID {
        let exp = build(with(horizon, trials, attack.clone()))?;
        gaps.push(
            exp.map_trials(trials, |o| Ok(o.trajectory.average_gap))
                .map_err(|e| e.to_string())?,
        );
        bounds.push(exp.gap_bound().map_err(|e| e.to_string())?.rate_bound);
    }
    Ok((gaps, bounds))
}

fn in_band(slope: f64) -> bool {
    slope >= SLOPE_BAND.0 && slope <= SLOPE_BAND.1
}

fn rate_law() -> Outcome {
    let (gaps, _) = rate_sweep(AttackConfig::none(), 50)?;
    let fit = fit_rate(&RATE_GRID, &gaps).map_err(|e| e.to_string())?;
    ensure(in_band(fit.slope), || format!("slope {:.4} outside band", fit.slope))?;
    Ok(format!("slope {:.4} (stderr {:.4})", fit.slope, fit.stderr))
}

fn delay_resilience() -> Outcome {
    let (gaps, bounds) = rate_sweep(AttackConfig::constant(4), 50)?;
    let fit = fit_rate(&RATE_GRID, &gaps).map_err(|e| e.to_string())?;
    ensure(in_band(fit.slope), || format!("slope {:.4} outside band", fit.slope))?;
    for ((g, b), t) in gaps.iter().zip(&bounds).zip(RATE_GRID) {
        let median = quartiles(g).median;
        ensure(median <= *b, || format!("T={t}: median gap {median:e} > rate bound {b:e}"))?;
    }
    Ok(format!("slope {:.4} (stderr {:.4}), every median below its rate bound", fit.slope, fit.stderr))
}

fn high_probability_bound() -> Outcome {
    let mut details = Vec::new();
    for attack in [AttackConfig::none(), AttackConfig::constant(4)] {
        let exp = build(with(2000, 200, attack))?;
        let rhs = exp.gap_bound().map_err(|e| e.to_string())?.explicit_rhs;
        let lhs = exp
            .map_trials(200, |o| Ok(o.trajectory.eta * o.trajectory.gap_sum() + o.trajectory.final_bregman))
            .map_err(|e| e.to_string())?;
        let violations = lhs.iter().filter(|&&l| l > rhs + INEQUALITY_SLACK * (1.0 + rhs)).count();
        let rate = violations as f64 / lhs.len() as f64;
        ensure(rate <= 0.05, || format!("d={}: violation rate {rate}", exp.budget()))?;
        let worst = lhs.iter().copied().fold(0.0, f64::max);
        details.push(format!("d={}: {violations}/200 (max lhs/rhs {:.2e})", exp.budget(), worst / rhs));
    }
    Ok(details.join(", "))
}

fn weight_sequences() -> Outcome {
    let mut cells: Vec<(usize, AttackConfig)> = Vec::new();
    for &t in &RATE_GRID {
        cells.push((t, AttackConfig::none()));
        cells.push((t, AttackConfig::constant(4)));
    }
    cells.push((2000, AttackConfig::none()));
    cells.push((2000, AttackConfig::constant(4)));
    let count = cells.len();
    for (horizon, attack) in cells {
        let exp = build(with(horizon, 1, attack))?;
        let seq = WeightSequence::calibrated(
            horizon,
            exp.budget(),
            exp.eta,
            exp.oracle.sigma(),
            exp.map.strong_convexity(),
        )
        .map_err(|e| e.to_string())?;
        seq.check(exp.eta)
            .into_result()
            .map_err(|e| format!("T={horizon} d={}: {e}", exp.budget()))?;
        if horizon == 2000 {
            let rejected = seq.check(100.0 * exp.eta).into_result().is_err();
            ensure(rejected, || format!("T={horizon} d={}: inflated rate accepted", exp.budget()))?;
        }
    }
    Ok(format!("{count} cells pass, inflated rate rejected"))
}

fn subgaussian_checks() -> Outcome {
    let mut rng = TrialRng::seed_from_u64(8);
    let mut shipped: Vec<PathBuf> = std::fs::read_dir(configs_dir())
        .map_err(|e| e.to_string())?
        .map(|entry| entry.map(|e| e.path()))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    shipped.sort();
    let mut worst: f64 = 0.0;
    for path in &shipped {
        let config = ExperimentConfig::load(path, &[]).map_err(|e| e.to_string())?;
        let exp = build(config)?;
        let report = check_assumption2(&exp.oracle, &exp.network, 100_000, &mut rng).map_err(|e| e.to_string())?;
        ensure(report.pass, || format!("{}: {report:?}", path.display()))?;
        worst = worst.max(report.mgf_estimate);
    }
    let exp = build(diamond())?;
    for d in [1, 4, 8] {
        let lambdas = admissible_lambdas(d, exp.oracle.sigma(), 6);
        let report = check_max_mgf(&exp.oracle, &exp.network, d, &lambdas, 20_000, &mut rng).map_err(|e| e.to_string())?;
        ensure(report.pass, || format!("max-MGF d={d}: {:?}", report.rows))?;
    }
    Ok(format!(
        "{} noise configs (max MGF estimate {worst:.4} <= e*1.05), max-MGF d in {{1,4,8}}",
        shipped.len()
    ))
}

fn numerical_analysis() -> Outcome {
    let mut rng = TrialRng::seed_from_u64(9);
    let cases = [
        (instances::braess_network(1.0), instances::braess_latency()),
        (instances::two_od_network(), instances::two_od_latency()),
    ];

    let mut worst_grad: f64 = 0.0;
    for (net, latency) in &cases {
        let spec = LatencySpec::from_config(latency, net).map_err(|e| e.to_string())?;
        let inc = IncidenceMatrix::build(net);
        for _ in 0..50 {
            let flow = random_feasible_flow(net, &mut rng).0;
            let grad = dmd_bench::latency::mean_path_latency(&spec, &inc, &flow);
            let h = 1e-6;
            let fd: Vec<f64> = (0..flow.len())
                .map(|p| {
                    let mut up = flow.clone();
                    let mut down = flow.clone();
                    up[p] += h;
                    down[p] -= h;
                    (dmd_bench::latency::beckmann_potential(&spec, &inc, &up)
                        - dmd_bench::latency::beckmann_potential(&spec, &inc, &down))
                        / (2.0 * h)
                })
                .collect();
            let err = norm(&diff(&fd, &grad)) / norm(&grad);
            worst_grad = worst_grad.max(err);
        }
    }
    ensure(worst_grad <= 1e-5, || format!("gradient relative error {worst_grad:e}"))?;

    let net = instances::two_od_network();
    let domain = SimplexProduct::new(&net);
    let maps: [Box<dyn MirrorMap>; 2] = [
        Box::new(Entropic::new(domain.clone())),
        Box::new(Euclidean::new(domain.clone())),
    ];
    for map in &maps {
        for state_index in 0..50 {
            let start = random_feasible_flow(&net, &mut rng);
            let eta = rng.random_range(0.01..1.0);
            let state = MirrorState::initial(map.as_ref(), start.clone(), eta).map_err(|e| e.to_string())?;
            let mut bundle = BundleSum::empty(net.num_paths());
            let latency: Vec<f64> = (0..net.num_paths()).map(|_| rng.random_range(0.0..3.0)).collect();
            bundle.add(&latency);
            let next = mirror_step(map.as_ref(), &net, &state, &bundle).map_err(|e| e.to_string())?;
            let objective = |x: &[f64]| -> Result<f64, String> {
                let linear: f64 = x.iter().zip(&latency).map(|(a, l)| eta * a * l).sum();
                Ok(linear + map.divergence(start.as_slice(), x).map_err(|e| e.to_string())?)
            };
            let best = objective(next.flow.as_slice())?;
            for _ in 0..1000 {
                let candidate = random_feasible_flow(&net, &mut rng);
                let value = objective(candidate.as_slice())?;
                ensure(best <= value + 1e-12 * (1.0 + value.abs()), || {
                    format!("{} state {state_index}: step {best} beaten by {value}", map.name())
                })?;
            }
        }
        for _ in 0..1000 {
            let a = random_feasible_flow(&net, &mut rng);
            let b = random_feasible_flow(&net, &mut rng);
            let div = map.divergence(a.as_slice(), b.as_slice()).map_err(|e| e.to_string())?;
            let quad = 0.5 * map.strong_convexity() * norm(&diff(a.as_slice(), b.as_slice())).powi(2);
            ensure(div >= quad * (1.0 - 1e-12), || format!("{}: D = {div} < {quad}", map.name()))?;
        }
    }
    Ok(format!(
        "gradient rel. error {worst_grad:.1e}; 100 steps beat 10^3 candidates each; 2x10^3 strong-convexity pairs"
    ))
}

fn determinism() -> Outcome {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut config = diamond();
    config.seed = 7;
    config.record_samples = true;
    let run = |name: &str| -> Result<PathBuf, String> {
        let dir = root.path().join(name);
        let inv = Invocation::new(config.clone(), &[], Some(dir.clone()));
        cmd_run(&inv, &Strategies::builtin()).map_err(|e| e.to_string())?;
        Ok(dir)
    };
    let (a, b) = (run("a")?, run("b")?);
    let mut names: Vec<String> = std::fs::read_dir(&a)
        .map_err(|e| e.to_string())?
        .map(|e| e.map(|e| e.file_name().to_string_lossy().into_owned()))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    names.sort();
    for name in &names {
        let x = std::fs::read(a.join(name)).map_err(|e| e.to_string())?;
        let y = std::fs::read(b.join(name)).map_err(|e| e.to_string())?;
        ensure(x == y, || format!("{name} differs"))?;
    }
    Ok(format!("{} artifacts byte-identical", names.len()))
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("lemma certificate suite", lemma_suite),
        ("calendar combinatorics", calendar_fuzz),
        ("equilibrium oracle", equilibrium_oracle),
        ("rate law, delay-free", rate_law),
        ("delay resilience, d=4", delay_resilience),
        ("high-probability bound", high_probability_bound),
        ("weight sequence", weight_sequences),
        ("subgaussian checks", subgaussian_checks),
        ("numerical analysis", numerical_analysis),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.1}s]", i + 1),
            Err(reason) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {reason} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
