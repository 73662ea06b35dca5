use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn smasim(dir: &Path, args: &[&str], config: Option<&Value>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_smasim"));
    cmd.current_dir(dir).args(args).arg("--out").arg(dir.join("out"));
    if let Some(c) = config {
        let path = dir.join("config.json");
        fs::write(&path, serde_json::to_string_pretty(c).unwrap()).unwrap();
        cmd.arg("--config").arg(path);
    }
    cmd.output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Data lines of a CSV output, without the manifest comment.
fn data_lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(String::from)
        .collect()
}

fn column(lines: &[String], name: &str) -> Vec<f64> {
    let k = lines[0].split(',').position(|c| c == name).unwrap();
    lines[1..].iter().map(|l| l.split(',').nth(k).unwrap().parse().unwrap()).collect()
}

#[test]
fn neutral_scenario_writes_a_level_trajectory() {
    let dir = TempDir::new().unwrap();
    let config = json!({
        "schema_version": 1,
        "simulate": {"horizon": {"t_end": 20.0}, "j_eq": {"type": "constant", "value": 0.0}}
    });
    let out = smasim(dir.path(), &["simulate"], Some(&config));
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let lines = data_lines(&dir.path().join("out/trajectory.csv"));
    let alpha = column(&lines, "alpha_rad");
    assert!(alpha.len() > 2);
    assert!(alpha.iter().all(|a| a.abs() < 1e-9));
    let manifest = read_json(&dir.path().join("out/manifest.json"));
    assert_eq!(manifest["tool"], "smasim");
    assert_eq!(manifest["command"], "simulate");
    assert!(manifest["git"].is_string());
}

#[test]
fn manifest_config_reproduces_the_run() {
    let dir = TempDir::new().unwrap();
    let config = json!({
        "schema_version": 1,
        "simulate": {"horizon": {"t_end": 30.0}, "random_steps": {"duration": 30.0}}
    });
    let first = smasim(dir.path(), &["simulate", "--seed", "11"], Some(&config));
    assert_eq!(code(&first), 0, "{}", stderr(&first));
    let manifest = read_json(&dir.path().join("out/manifest.json"));
    let before = data_lines(&dir.path().join("out/trajectory.csv"));
    let jumps_before = data_lines(&dir.path().join("out/jumps.csv"));

    let replay = TempDir::new().unwrap();
    let second = smasim(replay.path(), &["simulate"], Some(&manifest["config"]));
    assert_eq!(code(&second), 0, "{}", stderr(&second));
    assert_eq!(before, data_lines(&replay.path().join("out/trajectory.csv")));
    assert_eq!(jumps_before, data_lines(&replay.path().join("out/jumps.csv")));
    assert_eq!(read_json(&replay.path().join("out/manifest.json"))["config"], manifest["config"]);
}

#[test]
fn jsonl_output_has_manifest_header() {
    let dir = TempDir::new().unwrap();
    let config = json!({
        "schema_version": 1,
        "output": {"format": "jsonl"},
        "simulate": {
            "variant": "hybrid",
            "horizon": {"t_end": 50.0},
            "velocity": {"type": "constant", "value": 1e-4}
        }
    });
    let out = smasim(dir.path(), &["simulate"], Some(&config));
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = fs::read_to_string(dir.path().join("out/trajectory.jsonl")).unwrap();
    let rows: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows[0]["manifest"]["config"]["simulate"]["variant"], "hybrid");
    assert!(rows[1..].iter().all(|r| r["sigma_Pa"].is_number() && r["x_M"].is_number()));
}

#[test]
fn unknown_field_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let config = json!({"schema_version": 1, "simulate": {"horizn": {"t_end": 1.0}}});
    let out = smasim(dir.path(), &["simulate"], Some(&config));
    assert_eq!(code(&out), 2);
    let msg = stderr(&out);
    assert!(msg.contains("config.json") && msg.contains("horizn"), "{msg}");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn wrong_schema_version_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let out = smasim(dir.path(), &["isotherm"], Some(&json!({"schema_version": 99})));
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("schema_version"), "{}", stderr(&out));
}

#[test]
fn early_stop_is_a_simulation_error() {
    let dir = TempDir::new().unwrap();
    let config = json!({
        "schema_version": 1,
        "solver": {"max_steps": 5},
        "simulate": {"horizon": {"t_end": 100.0}}
    });
    let out = smasim(dir.path(), &["simulate"], Some(&config));
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(dir.path().join("out/trajectory.csv").exists());
}

#[test]
fn single_scenario_benchmark_reports() {
    let dir = TempDir::new().unwrap();
    let config = json!({
        "schema_version": 1,
        "benchmark": {"scenarios": 1, "repetitions": 1, "steps": {"duration": 20.0}, "grid_intervals": 100}
    });
    let out = smasim(dir.path(), &["benchmark", "--seed", "3"], Some(&config));
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = read_json(&dir.path().join("out/benchmark_report.json"));
    assert_eq!(report["report"]["scenarios"].as_array().unwrap().len(), 1);
    assert_eq!(report["report"]["config"]["seed"], 3);
    assert!(report["report"]["max_discrepancy"].as_f64().unwrap() < 0.05);
    assert_eq!(data_lines(&dir.path().join("out/benchmark_scenarios.csv")).len(), 2);
}

#[test]
fn isotherm_writes_curves_and_features() {
    let dir = TempDir::new().unwrap();
    let config = json!({
        "schema_version": 1,
        "isotherm": {"temperatures": [300.0, 320.0], "profile": {"points_per_branch": 100}}
    });
    let out = smasim(dir.path(), &["isotherm"], Some(&config));
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for t in ["300", "320"] {
        let lines = data_lines(&dir.path().join(format!("out/isotherm_{t}K.csv")));
        assert_eq!(lines.len(), 201);
    }
    let features = read_json(&dir.path().join("out/isotherm_features.json"));
    let plateaus: Vec<f64> = features
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["features"]["loading_plateau"].as_f64().unwrap())
        .collect();
    assert!(plateaus[1] > plateaus[0]);
}

#[test]
fn synthetic_calibration_recovers_the_material() {
    let dir = TempDir::new().unwrap();
    let config = json!({
        "schema_version": 1,
        "calibrate": {"synthetic": {"temperatures": [300.0, 330.0], "points_per_branch": 40, "perturbation": 0.1}}
    });
    let out = smasim(dir.path(), &["calibrate", "--seed", "5"], Some(&config));
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let fitted = read_json(&dir.path().join("out/fitted_params.json"));
    let truth = serde_json::to_value(sma_hybrid::MaterialParams::cuznal()).unwrap();
    for key in ["E_A", "sigma_T", "delta_sigma"] {
        let (a, b) = (fitted[key].as_f64().unwrap(), truth[key].as_f64().unwrap());
        assert!((a / b - 1.0).abs() < 1e-3, "{key}: {a} vs {b}");
    }
    let report = read_json(&dir.path().join("out/fit_report.json"));
    assert_eq!(report["report"]["converged"], true);
}

#[test]
fn unconverged_fit_is_a_calibration_error() {
    let dir = TempDir::new().unwrap();
    let config = json!({
        "schema_version": 1,
        "calibrate": {
            "synthetic": {"temperatures": [315.0], "points_per_branch": 20, "perturbation": 0.2},
            "fit": {"max_iterations": 1}
        }
    });
    let out = smasim(dir.path(), &["calibrate"], Some(&config));
    assert_eq!(code(&out), 4, "{}", stderr(&out));
    assert!(dir.path().join("out/fit_report.json").exists());
}

#[test]
fn missing_unloading_branch_is_reported() {
    let dir = TempDir::new().unwrap();
    let mut csv = String::from("eps,sigma_Pa,branch\n");
    for k in 0..20 {
        csv.push_str(&format!("{},{},loading\n", k as f64 * 1e-3, k as f64 * 1e7));
    }
    fs::write(dir.path().join("loading_only.csv"), csv).unwrap();
    let config = json!({
        "schema_version": 1,
        "calibrate": {"data": [{"path": "loading_only.csv", "ambient": 315.0}]}
    });
    let out = smasim(dir.path(), &["calibrate"], Some(&config));
    assert_eq!(code(&out), 4, "{}", stderr(&out));
    assert!(stderr(&out).contains("unloading"), "{}", stderr(&out));
}
