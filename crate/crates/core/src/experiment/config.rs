use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::attack::AttackConfig;
use crate::dmd::EtaConfig;
use crate::error::{Error, Result};
use crate::latency::{LatencyConfig, NoiseConfig};
use crate::network::NetworkConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriumConfig {
    #[serde(default = "EquilibriumConfig::default_tol")]
    pub tol: f64,
    #[serde(default = "EquilibriumConfig::default_max_iters")]
    pub max_iters: usize,
}

impl EquilibriumConfig {
    fn default_tol() -> f64 {
        1e-8
    }

    fn default_max_iters() -> usize {
        100_000
    }
}

impl Default for EquilibriumConfig {
    fn default() -> Self {
        EquilibriumConfig {
            tol: Self::default_tol(),
            max_iters: Self::default_max_iters(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WanesConfig {
    /// Target gap; the rate-form bound when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "SweepConfig::default_horizons")]
    pub horizons: Vec<usize>,
    #[serde(default = "SweepConfig::default_budgets")]
    pub budgets: Vec<u32>,
}

impl SweepConfig {
    fn default_horizons() -> Vec<usize> {
        vec![256, 512, 1024, 2048, 4096, 8192]
    }

    fn default_budgets() -> Vec<u32> {
        vec![1, 2, 4, 8]
    }
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            horizons: Self::default_horizons(),
            budgets: Self::default_budgets(),
        }
    }
}

/// A complete, self-describing experiment. Only `network` and `horizon`
/// (alias `T`) are required.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "ExperimentConfig::default_version")]
    pub version: u32,
    pub network: NetworkConfig,
    #[serde(alias = "T")]
    pub horizon: usize,
    #[serde(default)]
    pub latency: LatencyConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub attack: AttackConfig,
    #[serde(default = "ExperimentConfig::default_mirror_map")]
    pub mirror_map: String,
    #[serde(default)]
    pub eta: EtaConfig,
    #[serde(default = "ExperimentConfig::default_trials")]
    pub trials: usize,
    #[serde(default = "ExperimentConfig::default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub equilibrium: EquilibriumConfig,
    #[serde(default)]
    pub wanes: WanesConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    /// Starting flow; uniform per OD pair when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_flow: Option<Vec<f64>>,
    /// Also write per-round latency samples in `run`.
    #[serde(default)]
    pub record_samples: bool,
}

impl ExperimentConfig {
    fn default_version() -> u32 {
        SCHEMA_VERSION
    }

    fn default_mirror_map() -> String {
        "entropic".into()
    }

    fn default_trials() -> usize {
        100
    }

    fn default_delta() -> f64 {
        0.05
    }

    /// Minimal config with every optional field at its default.
    pub fn new(network: NetworkConfig, horizon: usize) -> Self {
        ExperimentConfig {
            version: SCHEMA_VERSION,
            network,
            horizon,
            latency: LatencyConfig::default(),
            noise: NoiseConfig::default(),
            attack: AttackConfig::default(),
            mirror_map: Self::default_mirror_map(),
            eta: EtaConfig::default(),
            trials: Self::default_trials(),
            delta: Self::default_delta(),
            seed: 0,
            output_dir: None,
            equilibrium: EquilibriumConfig::default(),
            wanes: WanesConfig::default(),
            sweep: SweepConfig::default(),
            initial_flow: None,
            record_samples: false,
        }
    }

    pub fn from_value(value: Value) -> Result<Self> {
        let config: ExperimentConfig = serde_path_to_error::deserialize(value).map_err(|e| {
            let mut pointer = to_pointer(&e.path().to_string());
            let message = e.inner().to_string();
            if let Some(field) = missing_field(&message) {
                pointer = format!("{}/{field}", pointer.trim_end_matches('/'));
            }
            Error::Config { pointer, message }
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("config is not valid JSON: {e}")))?;
        Self::from_value(value)
    }

    /// Reads `path` and applies `KEY=VALUE` overrides before validation.
    pub fn load(path: &Path, overrides: &[Override]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidArgument(format!("cannot read config {}: {e}", path.display())))?;
        let mut value: Value = serde_json::from_str(&text)
            .map_err(|e| Error::InvalidArgument(format!("config {} is not valid JSON: {e}", path.display())))?;
        for o in overrides {
            o.apply(&mut value)?;
        }
        Self::from_value(value)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    fn validate(&self) -> Result<()> {
        if self.version != SCHEMA_VERSION {
            return Err(Error::config(
                "/version",
                format!("unsupported schema version {} (expected {SCHEMA_VERSION})", self.version),
            ));
        }
        if self.horizon == 0 {
            return Err(Error::config("/horizon", "horizon must be >= 1"));
        }
        if self.trials == 0 {
            return Err(Error::config("/trials", "trials must be >= 1"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::config("/delta", "delta must lie in (0, 1)"));
        }
        if !(self.equilibrium.tol > 0.0) {
            return Err(Error::config("/equilibrium/tol", "tolerance must be positive"));
        }
        if let Some(e) = self.wanes.epsilon {
            if !(e > 0.0) {
                return Err(Error::config("/wanes/epsilon", "epsilon must be positive"));
            }
        }
        Ok(())
    }
}

/// `serde_path_to_error` renders paths as `a.b[0].c`; configs report JSON pointers.
fn to_pointer(path: &str) -> String {
    if path == "." || path.is_empty() {
        return String::new();
    }
    let mut out = String::new();
    for part in path.split('.') {
        let (name, rest) = part.split_once('[').unwrap_or((part, ""));
        if !name.is_empty() {
            out.push('/');
            out.push_str(name);
        }
        for index in rest.split('[') {
            let index = index.trim_end_matches(']');
            if !index.is_empty() {
                out.push('/');
                out.push_str(index);
            }
        }
    }
    out
}

fn missing_field(message: &str) -> Option<&str> {
    message.strip_prefix("missing field `")?.split('`').next()
}

/// One `--set key.path=value` override. The value is parsed as JSON when
/// possible and taken as a string otherwise.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Override {
    pub key: String,
    pub value: Value,
}

impl std::str::FromStr for Override {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (key, raw) = s
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("override `{s}` is not KEY=VALUE")))?;
        if key.is_empty() || key.split('.').any(str::is_empty) {
            return Err(Error::InvalidArgument(format!("override key `{key}` is malformed")));
        }
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        Ok(Override {
            key: key.to_string(),
            value,
        })
    }
}

impl Override {
    pub fn new(key: &str, value: Value) -> Self {
        Override {
            key: key.to_string(),
            value,
        }
    }

    pub fn apply(&self, root: &mut Value) -> Result<()> {
        let mut node = root;
        let parts: Vec<&str> = self.key.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let pointer = format!("/{}", parts[..=i].join("/"));
            let last = i + 1 == parts.len();
            node = match node {
                Value::Object(map) => {
                    if last {
                        map.insert(part.to_string(), self.value.clone());
                        return Ok(());
                    }
                    map.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()))
                }
                Value::Array(items) => {
                    let index: usize = part
                        .parse()
                        .map_err(|_| Error::config(pointer.clone(), "expected an array index"))?;
                    let slot = items
                        .get_mut(index)
                        .ok_or_else(|| Error::config(pointer.clone(), "array index out of range"))?;
                    if last {
                        *slot = self.value.clone();
                        return Ok(());
                    }
                    slot
                }
                _ => return Err(Error::config(pointer, "cannot descend into a scalar")),
            };
        }
        Ok(())
    }

    pub fn render(&self) -> String {
        format!("{}={}", self.key, self.value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances;
    use serde_json::json;

    fn minimal() -> Value {
        json!({ "network": instances::diamond_config(1.0), "T": 50 })
    }

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::from_value(minimal()).unwrap();
        assert_eq!(c.horizon, 50);
        assert_eq!(c.mirror_map, "entropic");
        assert_eq!(c.trials, 100);
        assert_eq!(c.delta, 0.05);
        assert_eq!(c, ExperimentConfig::new(instances::diamond_config(1.0), 50));
    }

    #[test]
    fn round_trip_is_a_fixpoint() {
        let mut c = ExperimentConfig::new(instances::braess_config(2.0), 100);
        c.latency = instances::braess_latency();
        c.attack = AttackConfig::burst(3, 4, 5);
        c.noise.sigma = Some(0.3);
        c.initial_flow = Some(vec![1.0, 0.5, 0.5]);
        let text = c.to_json();
        let back = ExperimentConfig::from_json_str(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn missing_network_names_pointer() {
        let err = ExperimentConfig::from_value(json!({ "T": 5 })).unwrap_err();
        match err {
            Error::Config { pointer, .. } => assert_eq!(pointer, "/network"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn nested_errors_name_pointer() {
        let mut v = minimal();
        v["network"]["edges"][1]["from"] = json!(3);
        match ExperimentConfig::from_value(v).unwrap_err() {
            Error::Config { pointer, .. } => assert_eq!(pointer, "/network/edges/1/from"),
            other => panic!("{other}"),
        }
        let mut v = minimal();
        v["attack"] = json!({ "strategy": "constant", "dd": 3 });
        match ExperimentConfig::from_value(v).unwrap_err() {
            Error::Config { pointer, message } => {
                assert_eq!(pointer, "/attack/dd");
                assert!(message.contains("dd"));
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn overrides_apply() {
        let mut v = minimal();
        for s in ["attack.strategy=constant", "attack.d=3", "eta.scale=100", "network.od_pairs.0.demand=2"] {
            s.parse::<Override>().unwrap().apply(&mut v).unwrap();
        }
        let c = ExperimentConfig::from_value(v).unwrap();
        assert_eq!(c.attack, AttackConfig::constant(3));
        assert_eq!(c.eta.scale, 100.0);
        assert_eq!(c.network.od_pairs[0].demand, 2.0);
        assert!("novalue".parse::<Override>().is_err());
        assert!("a..b=1".parse::<Override>().is_err());
    }

    #[test]
    fn semantic_validation() {
        let mut v = minimal();
        v["delta"] = json!(1.5);
        assert!(matches!(ExperimentConfig::from_value(v), Err(Error::Config { pointer, .. }) if pointer == "/delta"));
    }
}
