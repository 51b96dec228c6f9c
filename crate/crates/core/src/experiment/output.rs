use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::trial::TrialOutcome;
use crate::error::Result;
use crate::network::Network;

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// In-memory CSV table with a fixed header.
#[derive(Debug)]
pub struct CsvTable {
    columns: usize,
    writer: csv::Writer<Vec<u8>>,
}

impl CsvTable {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer
            .write_record(header.iter().map(|h| h.as_ref()))
            .expect("writing to memory");
        CsvTable {
            columns: header.len(),
            writer,
        }
    }

    pub fn row(&mut self, fields: Vec<String>) {
        assert_eq!(fields.len(), self.columns, "CSV row width");
        self.writer.write_record(&fields).expect("writing to memory");
    }

    pub fn into_string(self) -> String {
        let bytes = self.writer.into_inner().expect("flushing to memory");
        String::from_utf8(bytes).expect("fields are UTF-8")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Writes artifacts under one directory and remembers their checksums.
#[derive(Debug)]
pub struct ArtifactWriter {
    dir: PathBuf,
    files: Vec<FileRecord>,
}

impl ArtifactWriter {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(ArtifactWriter {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<()> {
        fs::write(self.dir.join(name), contents)?;
        self.files.push(FileRecord {
            path: name.to_string(),
            sha256: sha256_hex(contents),
            bytes: contents.len(),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn write_csv(&mut self, name: &str, table: CsvTable) -> Result<()> {
        self.write(name, table.into_string().as_bytes())
    }

    /// Writes `manifest.json` listing every file written so far.
    pub fn finish(mut self, mut manifest: RunManifest) -> Result<RunManifest> {
        manifest.files = std::mem::take(&mut self.files);
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(self.dir.join("manifest.json"), text)?;
        Ok(manifest)
    }
}

/// Provenance of one command invocation. Contains no timestamps, so equal
/// inputs give an equal manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub code_version: String,
    pub command: String,
    /// SHA-256 of the effective config serialized as pretty JSON.
    pub config_hash: String,
    pub master_seed: u64,
    /// `splitmix64(master + (i + 1)·0x9E3779B97F4A7C15)` for trial `i`.
    pub seed_derivation: String,
    pub trial_seeds: Vec<u64>,
    pub overrides: Vec<String>,
    pub files: Vec<FileRecord>,
}

impl RunManifest {
    pub fn new(command: &str, config_json: &str, master_seed: u64, trial_seeds: Vec<u64>, overrides: Vec<String>) -> Self {
        RunManifest {
            schema_version: super::config::SCHEMA_VERSION,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_hash: sha256_hex(config_json.as_bytes()),
            master_seed,
            seed_derivation: "splitmix64(master + (i + 1) * 0x9E3779B97F4A7C15)".to_string(),
            trial_seeds,
            overrides,
            files: Vec::new(),
        }
    }
}

/// `t, flow_<path>..., latency_<path>..., bundle_size, gap, bregman_to_star`.
pub fn trajectory_csv(network: &Network, outcome: &TrialOutcome) -> CsvTable {
    let ids: Vec<&str> = network.paths().iter().map(|p| p.id.as_str()).collect();
    let mut header = vec!["t".to_string()];
    header.extend(ids.iter().map(|id| format!("flow_{id}")));
    header.extend(ids.iter().map(|id| format!("latency_{id}")));
    header.extend(["bundle_size", "gap", "bregman_to_star"].map(String::from));
    let mut table = CsvTable::new(&header);
    for r in &outcome.trajectory.rounds {
        let mut row = vec![r.t.to_string()];
        row.extend(r.flow.iter().map(|&x| fmt_f64(x)));
        row.extend(r.latency.iter().map(|&x| fmt_f64(x)));
        row.push(r.bundle_size.to_string());
        row.push(fmt_f64(r.gap));
        row.push(fmt_f64(r.bregman_to_star));
        table.row(row);
    }
    table
}

/// `t, d, d_eff, delivered_at`.
pub fn schedule_csv(outcome: &TrialOutcome) -> CsvTable {
    let mut table = CsvTable::new(&["t", "d", "d_eff", "delivered_at"]);
    for t in 1..=outcome.schedule.horizon() {
        table.row(vec![
            t.to_string(),
            outcome.schedule.raw(t).to_string(),
            outcome.schedule.effective(t).to_string(),
            outcome.calendar.delivered_at(t).to_string(),
        ]);
    }
    table
}

/// `t, path_id, ell, z`: one row per round and path.
pub fn samples_csv(network: &Network, outcome: &TrialOutcome) -> CsvTable {
    let mut table = CsvTable::new(&["t", "path_id", "ell", "z"]);
    for r in &outcome.trajectory.rounds {
        for (p, path) in network.paths().iter().enumerate() {
            table.row(vec![
                r.t.to_string(),
                path.id.clone(),
                fmt_f64(r.latency[p]),
                fmt_f64(r.noise[p]),
            ]);
        }
    }
    table
}
