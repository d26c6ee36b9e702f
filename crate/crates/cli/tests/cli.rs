use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sheaf-fmtl"))
}

fn repo_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn ok(out: Output) -> String {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Quickstart config shortened so the test stays fast.
fn short_config(dir: &Path) -> PathBuf {
    let text = fs::read_to_string(repo_config("quickstart.toml"))
        .unwrap()
        .replace("rounds = 100", "rounds = 5");
    let path = dir.join("quick.toml");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn run_writes_outputs_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path());
    for sub in ["a", "b"] {
        let stdout = ok(bin()
            .args(["run", "--config"])
            .arg(&cfg)
            .args(["--seed", "4", "--out"])
            .arg(dir.path().join(sub))
            .output()
            .unwrap());
        assert!(stdout.contains("quickstart-seed4"));
        assert!(stdout.contains("sheaf-fmtl"));
    }
    let a = fs::read(dir.path().join("a/metrics.csv")).unwrap();
    let b = fs::read(dir.path().join("b/metrics.csv")).unwrap();
    assert_eq!(a, b);
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("a/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 4);
    assert!(dir.path().join("a/heatmap_sheaf-fmtl_r0.csv").exists());
    ok(bin()
        .args(["run", "--sequential", "--config"])
        .arg(&cfg)
        .args(["--seed", "4", "--out"])
        .arg(dir.path().join("c"))
        .output()
        .unwrap());
    assert_eq!(fs::read(dir.path().join("c/metrics.csv")).unwrap(), a);
}

#[test]
fn repeats_flag_adds_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path());
    ok(bin()
        .args(["run", "--repeats", "2", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("r"))
        .output()
        .unwrap());
    let agg = fs::read_to_string(dir.path().join("r/metrics_aggregate.csv")).unwrap();
    assert!(
        agg.starts_with("algorithm,round,bits_mean,psi_mean,psi_stderr,metric_mean,metric_stderr")
    );
}

#[test]
fn gen_data_round_trips_through_csv_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path());
    let data = dir.path().join("data");
    ok(bin()
        .args(["gen-data", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&data)
        .output()
        .unwrap());
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(data.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["n_clients"], 10);
    assert!(data.join("train/client_009.csv").exists());
    let files: Vec<String> = (0..10)
        .map(|i| format!("\"data/train/client_{i:03}.csv\""))
        .collect();
    let csv_cfg = format!(
        "name = \"from-csv\"\nedge_list = \"data/topology.txt\"\n\n[data]\nsource = \"csv\"\nfiles = [{}]\ntarget = \"target\"\ntask = {{ kind = \"classification\", classes = 3 }}\n\n[[algorithms]]\nalgorithm = \"local\"\nrounds = 3\n",
        files.join(", ")
    );
    let csv_path = dir.path().join("csv.toml");
    fs::write(&csv_path, csv_cfg).unwrap();
    let stdout = ok(bin()
        .args(["run", "--config"])
        .arg(&csv_path)
        .arg("--out")
        .arg(dir.path().join("csv-out"))
        .output()
        .unwrap());
    assert!(stdout.contains("from-csv-seed0"));
}

#[test]
fn inspect_sheaf_prints_and_exports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path());
    let doc = dir.path().join("sheaf.json");
    let stdout = ok(bin()
        .args(["inspect-sheaf", "--with-maps", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&doc)
        .output()
        .unwrap());
    assert!(stdout.contains("vertices       10"));
    assert!(stdout.contains("dfedu"));
    let json: serde_json::Value = serde_json::from_slice(&fs::read(&doc).unwrap()).unwrap();
    assert_eq!(json["n_vertices"], 10);
    let edges = json["edges"].as_array().unwrap().len();
    assert_eq!(json["maps"].as_array().unwrap().len(), edges);
    // γ = 0.1 of 30-dimensional models
    assert!(json["edge_dims"].as_array().unwrap().iter().all(|d| d == 3));
}

#[test]
fn ablation_subcommand_emits_table() {
    let dir = tempfile::tempdir().unwrap();
    let spec = fs::read_to_string(repo_config("ablation.toml"))
        .unwrap()
        .replace(
            "lambdas = [1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0]",
            "lambdas = [1e-3, 10.0]",
        )
        .replace("seeds = [0, 1, 2]", "seeds = [0]")
        .replace("samples_per_client = 100", "samples_per_client = 40");
    let path = dir.path().join("ablation.toml");
    fs::write(&path, spec).unwrap();
    let out = dir.path().join("abl");
    ok(bin()
        .args(["ablation", "--rounds", "5", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap());
    let table = fs::read_to_string(out.join("ablation.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 3 * 2 * 2);
    assert!(out.join("spec.toml").exists());
}

#[test]
fn bad_config_reports_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    let text = fs::read_to_string(repo_config("quickstart.toml"))
        .unwrap()
        .replace("gamma = 0.1", "gamma = 2.0");
    fs::write(&path, text).unwrap();
    let out = bin().args(["run", "--config"]).arg(&path).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("algorithms[0]"), "{err}");
    let missing = bin()
        .args(["run", "--config", "/nonexistent.toml"])
        .output()
        .unwrap();
    assert!(!missing.status.success());
}

#[test]
fn shipped_configs_parse() {
    for name in [
        "quickstart.toml",
        "collaboration.toml",
        "heterogeneous.toml",
    ] {
        let dir = tempfile::tempdir().unwrap();
        // inspect-sheaf loads and validates without training
        ok(bin()
            .args(["inspect-sheaf", "--config"])
            .arg(repo_config(name))
            .current_dir(dir.path())
            .output()
            .unwrap());
    }
}
