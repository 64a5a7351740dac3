use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mlbench::experiment::{load_config, parse_config, Manifest, RunStatus};

fn mlbench(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mlbench")).args(args).current_dir(cwd).env_remove("MLBENCH_OUT").output().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn repo_configs() -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut paths: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    paths.sort();
    paths
}

fn tiny_data() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/tiny.libsvm").display().to_string()
}

#[test]
fn missing_config_names_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = mlbench(&["run", "missing.json"], dir.path());
    assert!(!out.status.success());
    assert!(stderr(&out).contains("missing.json"), "{}", stderr(&out));
}

#[test]
fn unknown_flag_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = mlbench(&["sgd", "--turbo"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("Usage"));
}

#[test]
fn invalid_config_reports_json_path() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(&repo_configs()[0]).unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    doc["algorithm"]["mode"] = "turbo".into();
    fs::write(dir.path().join("bad.json"), doc.to_string()).unwrap();
    let out = mlbench(&["run", "bad.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("AsyncDistributed"), "{}", stderr(&out));
}

#[test]
fn sgd_shorthand_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = mlbench(
        &["sgd", "--mode", "serial", "--epochs", "1", "--batch", "8", "--data", &tiny_data(), "--out", "o"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let trace = fs::read_to_string(dir.path().join("o/sgd_serial_w1_trace.csv")).unwrap();
    assert!(trace.starts_with("epoch,loss,elapsed_s\n1,"));
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("o/sgd_serial_w1_meta.json")).unwrap()).unwrap();
    for key in ["mode", "workers", "epochs", "lr", "batch", "seed", "final_loss", "total_time_s"] {
        assert!(meta.get(key).is_some(), "{key}");
    }
}

#[test]
fn output_dir_falls_back_to_env() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_mlbench"))
        .args(["sgd", "--mode", "async-shared", "--workers", "2", "--epochs", "1", "--data", &tiny_data()])
        .current_dir(dir.path())
        .env("MLBENCH_OUT", "from-env")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(dir.path().join("from-env/sgd_asyncshared_w2_trace.csv").exists());
}

#[test]
fn gen_data_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a.csv", "b.csv"] {
        let out = mlbench(&["gen-data", "--kind", "glyphs", "--n", "5", "--seed", "1", "--out", name], dir.path());
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let a = fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b.csv")).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 6);
    assert!(text.starts_with("label,x0,x1,"));
}

#[test]
fn gen_data_libsvm_loads_back() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["gen-data", "--kind", "classification", "--n", "30", "--d", "3", "--format", "libsvm", "--out", "c.svm"];
    assert!(mlbench(&args, dir.path()).status.success());
    let data = mlbench::datasets::load_libsvm(dir.path().join("c.svm")).unwrap();
    assert_eq!((data.n_rows(), data.n_dims()), (30, 3));
}

#[test]
fn devices_lists_bundled_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = mlbench(&["devices", "--json"], dir.path());
    assert!(out.status.success());
    let table: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(table["xeon-gold-6126"]["tdp_watts"], 125.0);
    assert_eq!(table["xeon-gold-6342"]["tdp_watts"], 230.0);
    assert_eq!(table["a100"]["tdp_watts"], 400.0);
}

#[test]
fn run_writes_manifest_and_bench() {
    let dir = tempfile::tempdir().unwrap();
    let config = &repo_configs().into_iter().find(|p| p.ends_with("sgd-tiny.json")).unwrap();
    let out = mlbench(&["run", config.to_str().unwrap(), "--out", "res"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let manifest = Manifest::load(dir.path().join("res/manifest.json")).unwrap();
    assert_eq!(manifest.status, RunStatus::Completed);
    assert_eq!(manifest.config.worker_counts, [1, 2, 4]);
    for entry in &manifest.outputs {
        assert!(dir.path().join("res").join(&entry.path).exists(), "{}", entry.path);
    }
    let bench = fs::read_to_string(dir.path().join("res/sgd_bench.csv")).unwrap();
    assert_eq!(bench.lines().count(), 4);
    assert!(bench.starts_with("workers,elapsed_s,speedup,efficiency,energy_j,energy_ratio\n1,"));
}

#[test]
fn async_outputs_are_flagged_nondeterministic() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{
        "schema_version": 1, "kind": "sgd",
        "dataset": {"type": "synth_classification", "n": 100, "d": 4, "margin": 2.0, "seed": 1},
        "algorithm": {"type": "sgd", "mode": "AsyncShared", "epochs": 2, "learning_rate": 0.5, "batch_size": 10, "seed": 1},
        "worker_counts": [1, 2], "device": "a100"
    }"#;
    fs::write(dir.path().join("c.json"), text).unwrap();
    assert!(mlbench(&["run", "c.json", "--out", "r"], dir.path()).status.success());
    let manifest = Manifest::load(dir.path().join("r/manifest.json")).unwrap();
    for entry in manifest.outputs {
        assert_eq!(entry.nondeterministic, entry.path.starts_with("sgd_w"), "{}", entry.path);
    }
}

#[test]
fn bundled_configs_parse_and_round_trip() {
    let configs = repo_configs();
    assert!(configs.len() >= 4);
    for path in configs {
        let config = load_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let once = config.to_json().unwrap();
        let twice = parse_config(&once).unwrap().to_json().unwrap();
        assert_eq!(once, twice, "{}", path.display());
    }
}
