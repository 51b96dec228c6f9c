use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dmd_bench::experiment::{
    cmd_run, cmd_sweep, cmd_verify, cmd_wanes, CommandStatus, EpsilonMode, Invocation, Override, SweepAxis,
};
use dmd_bench::registry::Strategies;

/// Delayed mirror descent traffic assignment bench.
///
/// Exit status: 0 when every check passes, 1 when a check fails, 2 on usage
/// or configuration errors.
#[derive(Debug, Parser)]
#[command(name = "dmd", version)]
struct Cli {
    #[command(flatten)]
    common: Common,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Master seed; overrides `seed` in the config.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", env = "DMD_OUT_DIR")]
    out: Option<PathBuf>,

    /// Number of trials; overrides `trials` in the config.
    #[arg(long, global = true, value_name = "N")]
    trials: Option<usize>,

    /// Config override such as `attack.d=3`; the value is parsed as JSON
    /// when possible.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<Override>,

    /// Worker threads for trials (defaults to all cores).
    #[arg(long, global = true, value_name = "K")]
    jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one seeded trial and write its trajectory.
    Run,
    /// Check the weight conditions, per-round certificates and the explicit bound.
    Verify,
    /// Sweep the horizon or the delay budget and summarize the gaps.
    Sweep {
        /// Axis to sweep: `T` or `d`.
        #[arg(long, default_value = "T")]
        axis: SweepAxis,
        /// Comma-separated grid; the config's sweep grid when absent.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<u64>>,
    },
    /// Estimate the probability that the time-averaged gap is below epsilon.
    Wanes {
        /// `theoretical` or a number.
        #[arg(long)]
        epsilon: Option<EpsilonMode>,
    },
}

fn execute(cli: Cli) -> dmd_bench::Result<CommandStatus> {
    let common = cli.common;
    let config = common
        .config
        .ok_or_else(|| dmd_bench::Error::InvalidArgument("--config PATH is required".into()))?;
    if let Some(jobs) = common.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| dmd_bench::Error::InvalidArgument(format!("--jobs: {e}")))?;
    }
    let mut overrides = common.overrides;
    if let Some(seed) = common.seed {
        overrides.push(Override::new("seed", seed.into()));
    }
    if let Some(trials) = common.trials {
        overrides.push(Override::new("trials", trials.into()));
    }
    let inv = Invocation::load(&config, &overrides, common.out)?;
    let strategies = Strategies::builtin();
    match cli.command {
        Command::Run => cmd_run(&inv, &strategies),
        Command::Verify => cmd_verify(&inv, &strategies),
        Command::Sweep { axis, grid } => cmd_sweep(&inv, &strategies, axis, grid),
        Command::Wanes { epsilon } => cmd_wanes(&inv, &strategies, epsilon),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(status) => {
            for line in &status.lines {
                println!("{line}");
            }
            if status.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
