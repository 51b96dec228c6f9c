//! Config-driven experiments: loading, seeded trials, the subcommands and
//! their on-disk artifacts.

mod commands;
mod config;
mod output;
mod trial;

pub use commands::{cmd_run, cmd_sweep, cmd_verify, cmd_wanes, CommandStatus, EpsilonMode, Invocation, SweepAxis};
pub use config::{EquilibriumConfig, ExperimentConfig, Override, SweepConfig, WanesConfig, SCHEMA_VERSION};
pub use output::{fmt_f64, sha256_hex, ArtifactWriter, CsvTable, FileRecord, RunManifest};
pub use trial::{trial_seed, Experiment, TrialOutcome};
