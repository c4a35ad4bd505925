use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn kinpinn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kinpinn")).args(args).output().unwrap()
}

fn tiny_config(dir: &Path, mode: &str, extra: &str) -> String {
    let path = dir.join(format!("{mode}.toml"));
    let text = format!(
        r#"
[network]
hidden = [6, 6]

[optimizer]
iterations = 4
log_every = 2

[optimizer.batches]
interior = 32
initial = 16
boundary = 0
constraint = 16

[scenario]
mode = "{mode}"

[rules]
velocity_points = 6
sphere_dirs = 4
oracle_points = 8
oracle_dirs = 4
ap_velocity_points = 12
x_points = 6
t_points = 3
dvm_x_cells = 16
{extra}
"#
    );
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(kinpinn(&[]).status.code(), Some(2));
    assert_eq!(kinpinn(&["study", "nonsense"]).status.code(), Some(2));
    assert_eq!(kinpinn(&["check-operators", "--seed", "x"]).status.code(), Some(2));
}

#[test]
fn empty_report_exits_zero_with_empty_index() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    let o = kinpinn(&["report", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json(&out.join("index.json")), serde_json::json!([]));
}

#[test]
fn violated_size_condition_fails_with_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path(), "apnn", "");
    fs::write(
        &cfg,
        fs::read_to_string(&cfg).unwrap().replace(
            "[scenario]\n",
            "[scenario]\nalpha = { form = \"cos_product\", base = 1.0, amplitude = 0.9 }\n",
        ),
    )
    .unwrap();
    let o = kinpinn(&["study", "ap", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("size condition"));
}

#[test]
fn untrained_study_is_inconclusive_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path(), "pinn", "[study]\nseeds = [0, 1]\n");
    fs::write(&cfg, fs::read_to_string(&cfg).unwrap().replace("iterations = 4", "iterations = 0")).unwrap();
    let out = dir.path().join("evl");
    let o = kinpinn(&["study", "error-vs-loss", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["outcome"], "inconclusive");
    assert_eq!(manifest["seeds"], serde_json::json!([0, 1]));
    assert_eq!(manifest["network_seed"], 5);
    let record = json(&out.join("00_error_vs_loss.json"));
    assert_eq!(record["config_hash"], manifest["config_hash"]);

    // Rebuilding the report from the saved record reproduces it exactly.
    let again = dir.path().join("again");
    let rec = out.join("00_error_vs_loss.json");
    let o = kinpinn(&["report", rec.to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    for name in ["index.json", "00_error_vs_loss.json", "00_error_vs_loss_table.csv", "00_error_vs_loss.svg"] {
        assert_eq!(fs::read(out.join(name)).unwrap(), fs::read(again.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn train_writes_networks_log_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path(), "pinn", "");
    let out = dir.path().join("t");
    let o = kinpinn(&["train", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("net0.kpnn").exists());
    let log = fs::read_to_string(out.join("log.csv")).unwrap();
    // Header plus iterations 0, 2, 4.
    assert_eq!(log.lines().count(), 4);
    assert!(json(&out.join("manifest.json"))["config_hash"].as_str().unwrap().len() == 64);
}

#[test]
fn reference_dvm_saves_one_trajectory_per_eps() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path(), "apnn", "");
    let out = dir.path().join("d");
    let o = kinpinn(&["reference", "dvm", "--config", &cfg, "--eps", "0.5,0.25", "--R", "6", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("dvm_eps0.5.kdvm").exists());
    assert!(out.join("dvm_eps0.25.kdvm").exists());
    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["config"]["weights"]["R"], 6.0);
    assert_eq!(json(&out.join("ap_table.json"))["rows"].as_array().unwrap().len(), 2);
}
