use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL: &str = r#"
seed = 42
ensemble_size = 8
horizon_h = 1.0
burn_in_h = 0.25
window_end_h = 1.0

[model]
n = [2, 3]
theta_a = 0.05
theta_d = [0.05, 0.2]

[[engines]]
kind = "markov"

[[engines]]
kind = "semi_markov"
attach_wait = { kind = "truncated_normal", location_s = 20.0, scale_s = 1.0 }
detach_wait = { kind = "exponential", mean_s = 60.0 }
"#;

fn ctcm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctcm")).args(args).output().expect("binary runs")
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let mut rows = vec![r.headers().unwrap().iter().map(String::from).collect()];
    rows.extend(r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()));
    rows
}

#[test]
fn simulate_is_byte_identical_across_runs_and_threads() {
    let dir = TempDir::new().unwrap();
    let config = write(&dir, "small.toml", SMALL);
    let mut outputs = Vec::new();
    for (i, threads) in ["1", "1", "2"].iter().enumerate() {
        let csv = dir.path().join(format!("out{i}.csv"));
        let jsonl = dir.path().join(format!("out{i}.jsonl"));
        let out = ctcm(&[
            "--threads",
            threads,
            "simulate",
            "--config",
            &config,
            "--out",
            csv.to_str().unwrap(),
            "--jsonl",
            jsonl.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        outputs.push((fs::read(&csv).unwrap(), fs::read(&jsonl).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);

    let other = dir.path().join("seed.csv");
    assert!(ctcm(&["simulate", "--config", &config, "--seed", "43", "--out", other.to_str().unwrap()])
        .status
        .success());
    assert_ne!(fs::read(&other).unwrap(), outputs[0].0);
}

#[test]
fn simulate_csv_layout_and_jsonl_fields() {
    let dir = TempDir::new().unwrap();
    let config = write(&dir, "small.toml", SMALL);
    let csv = dir.path().join("out.csv");
    let jsonl = dir.path().join("out.jsonl");
    let out =
        ctcm(&["simulate", "--config", &config, "--out", csv.to_str().unwrap(), "--jsonl", jsonl.to_str().unwrap()]);
    assert!(out.status.success());
    let rows = read_csv(&csv);
    assert_eq!(
        rows[0],
        [
            "n",
            "theta_a",
            "theta_d",
            "engine",
            "distribution",
            "M",
            "burn_in_s",
            "window_s",
            "est_vx",
            "est_vy",
            "se_vx",
            "se_vy",
            "theory_vx",
            "theory_vy",
            "tv_to_sigma"
        ]
    );
    // 2 n × 2 θ_d Markov points, then one semi-Markov point per n
    assert_eq!(rows.len(), 1 + 4 + 2);
    assert_eq!(rows[1][6], "900");
    assert_eq!(rows[1][7], "3600");
    assert_eq!(rows[5][3], "semi_markov");
    assert_eq!(rows[5][4], "truncated_normal/exponential");

    let lines: Vec<serde_json::Value> =
        fs::read_to_string(&jsonl).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 6 * 8);
    let first = &lines[0];
    for key in ["trajectory_id", "t_burn_centroid", "t_end_centroid", "jump_count", "occupancy"] {
        assert!(first.get(key).is_some(), "missing {key}");
    }
    let occ: f64 = first["occupancy"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).sum();
    assert!((occ - 1.0).abs() < 1e-9);
}

#[test]
fn theory_matches_simulate_theory_columns() {
    let dir = TempDir::new().unwrap();
    let config = write(&dir, "small.toml", SMALL);
    let sim = dir.path().join("sim.csv");
    let theory = dir.path().join("theory.csv");
    assert!(ctcm(&["simulate", "--config", &config, "--out", sim.to_str().unwrap()]).status.success());
    assert!(ctcm(&["theory", "--config", &config, "--out", theory.to_str().unwrap()]).status.success());
    let sim = read_csv(&sim);
    let theory = read_csv(&theory);
    assert_eq!(theory[0], ["n", "theta_a", "theta_d", "theory_vx", "theory_vy", "sigma"]);
    for row in &sim[1..] {
        let hit = theory[1..].iter().find(|t| t[..3] == row[..3]).expect("matching theory row");
        assert_eq!(hit[3..5], row[12..14]);
    }
    let sigma: f64 = theory[1][5].split(';').map(|x| x.parse::<f64>().unwrap()).sum();
    assert!((sigma - 1.0).abs() < 1e-12);
}

#[test]
fn theory_from_flags() {
    let out = ctcm(&["theory", "--n", "4", "--theta-a", "0.05", "--theta-d", "0.05"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "4");
    let v: f64 = row[3].parse().unwrap();
    assert!((v - 0.05 * (1.0 - 0.5f64.powi(4))).abs() < 1e-15);
    let sigma: Vec<f64> = row[5].split(';').map(|x| x.parse().unwrap()).collect();
    for (got, want) in sigma.iter().zip([0.0625, 0.25, 0.375, 0.25, 0.0625]) {
        assert!((got - want).abs() < 1e-15, "{got} vs {want}");
    }
}

#[test]
fn smoke_config_with_single_trajectory() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("smoke.csv");
    let config = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/smoke.toml");
    let out = ctcm(&["simulate", "--config", config, "--out", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_csv(&csv);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1][5], "1");
    assert_eq!(rows[1][10], "0");
    assert_eq!(rows[1][11], "0");
}

#[test]
fn config_errors_exit_with_diagnostics() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "bad.toml", &SMALL.replace("ensemble_size = 8", "ensemble_size = \"eight\""));
    let out = ctcm(&["simulate", "--config", &bad]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3") && err.contains("ensemble_size"), "{err}");

    let window = write(&dir, "window.toml", &SMALL.replace("window_end_h = 1.0", "window_end_h = 2.0"));
    let out = ctcm(&["simulate", "--config", &window]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("window_end_h"));

    let out = ctcm(&["simulate", "--config", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn validate_detects_injected_bound_violation() {
    let dir = TempDir::new().unwrap();
    let faulty = write(&dir, "faulty.toml", &SMALL.replace("n = [2, 3]", "n = 3\nsupport_radius = 0.1"));
    let out = ctcm(&["validate", "--level", "quick", "--criterion", "5", "--config", &faulty]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.starts_with("[FAIL] criterion 5"), "{text}");

    let out = ctcm(&["validate", "--level", "quick", "--criterion", "3,5"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 2);
}
