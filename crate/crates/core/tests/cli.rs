use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_dmd"));
    cmd.env_remove("DMD_OUT_DIR");
    cmd
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn dmd(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn run_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("diamond.json");
    let args = ["run", "--config", cfg.to_str().unwrap(), "--seed", "7"];
    for name in ["a", "b"] {
        let o = dmd(&args, &dir.path().join(name));
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = json(dir.path().join("a/manifest.json"));
    let b = json(dir.path().join("b/manifest.json"));
    assert_eq!(a["files"], b["files"]);
    assert_eq!(a["master_seed"], 7);
    let files: Vec<&str> = a["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["path"].as_str().unwrap())
        .collect();
    for expected in ["config.json", "trajectory.csv", "schedule.csv", "solution.json", "run.json"] {
        assert!(files.contains(&expected), "{expected} missing from {files:?}");
    }
}

#[test]
fn run_artifacts_have_documented_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("diamond.json");
    let o = dmd(
        &["run", "--config", cfg.to_str().unwrap(), "--set", "record_samples=true", "--set", "T=20"],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let header = |name: &str| {
        let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
        (text.lines().next().unwrap().to_string(), text.lines().count())
    };
    assert_eq!(
        header("trajectory.csv"),
        ("t,flow_P1,flow_P2,latency_P1,latency_P2,bundle_size,gap,bregman_to_star".into(), 21)
    );
    assert_eq!(header("schedule.csv"), ("t,d,d_eff,delivered_at".into(), 21));
    assert_eq!(header("samples.csv"), ("t,path_id,ell,z".into(), 41));
    let meta = json(dir.path().join("run.json"));
    assert_eq!(meta["d"], 1);
    assert_eq!(meta["sigma_psi"], 1.0);
}

#[test]
fn overrides_are_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("diamond.json");
    let o = dmd(
        &[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--set",
            "attack.strategy=constant",
            "--set",
            "attack.d=3",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = json(dir.path().join("manifest.json"));
    assert_eq!(m["overrides"], serde_json::json!(["attack.strategy=\"constant\"", "attack.d=3"]));
    assert_eq!(json(dir.path().join("run.json"))["d"], 3);
}

#[test]
fn missing_network_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"T": 10}"#).unwrap();
    let o = dmd(&["run", "--config", cfg.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("/network"));
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&dmd(&["run"], dir.path())), 2);
    assert_eq!(code(&dmd(&["explode"], dir.path())), 2);
    let cfg = config("diamond.json");
    let o = dmd(&["run", "--config", cfg.to_str().unwrap(), "--set", "noise.model=cauchy"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("/noise/model"));
}

#[test]
fn verify_passes_and_fails_on_inflated_rate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("diamond.json");
    let o = dmd(&["verify", "--config", cfg.to_str().unwrap()], &dir.path().join("ok"));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let report = json(dir.path().join("ok/verify.json"));
    assert_eq!(report["trials"], 100);
    assert_eq!(report["lemma_violations"], 0);

    let o = dmd(
        &["verify", "--config", cfg.to_str().unwrap(), "--set", "eta.scale=100"],
        &dir.path().join("bad"),
    );
    assert_eq!(code(&o), 1);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("432") && stdout.contains("t=1"), "{stdout}");
}

#[test]
fn verify_zero_noise_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("diamond_zero_noise.json");
    let o = dmd(&["verify", "--config", cfg.to_str().unwrap(), "--trials", "5"], dir.path());
    assert_eq!(code(&o), 0);
}

#[test]
fn sweep_rejects_single_point_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("diamond.json");
    let o = dmd(&["sweep", "--config", cfg.to_str().unwrap(), "--grid", "256"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("grid length >= 4"));
}

#[test]
fn budget_sweep_writes_cells() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("diamond.json");
    let o = dmd(
        &["sweep", "--config", cfg.to_str().unwrap(), "--axis", "d", "--grid", "1,2,4", "--trials", "10", "--set", "T=500"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let sweep = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().next().unwrap(), "value,median_gap,q25,q75,bound");
    assert_eq!(sweep.lines().count(), 4);
    let cells = std::fs::read_to_string(dir.path().join("cells.csv")).unwrap();
    assert_eq!(cells.lines().next().unwrap(), "seed,T,d,gap,bound,pass");
    assert_eq!(cells.lines().count(), 31);
    assert_eq!(json(dir.path().join("sweep.json"))["monotone"], true);
}

#[test]
fn wanes_modes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("diamond.json");
    let c = cfg.to_str().unwrap();
    let o = dmd(&["wanes", "--config", c, "--epsilon", "inf"], &dir.path().join("inf"));
    assert_eq!(code(&o), 0);
    assert_eq!(json(dir.path().join("inf/wanes.json"))["probability"], 1.0);

    let o = dmd(&["wanes", "--config", c, "--epsilon", "theoretical"], &dir.path().join("theory"));
    assert_eq!(code(&o), 0);

    let o = dmd(&["wanes", "--config", c, "--epsilon", "1e-6"], &dir.path().join("tight"));
    assert_eq!(code(&o), 1);
    assert_eq!(json(dir.path().join("tight/wanes.json"))["pass"], false);

    let o = dmd(&["wanes", "--config", c, "--trials", "10"], &dir.path().join("few"));
    assert_eq!(code(&o), 2);
}

#[test]
fn out_dir_defaults_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("diamond.json");
    let o = bin()
        .args(["run", "--config", cfg.to_str().unwrap(), "--jobs", "2"])
        .env("DMD_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(dir.path().join("manifest.json").exists());
}
