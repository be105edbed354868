use std::fs;
use std::path::Path;
use std::process::Command as Process;

use oscillab::{parse_config, run_experiment, Command, RunOptions};
use serde_json::Value;

fn opts(dir: &Path) -> RunOptions {
    RunOptions { out_dir: Some(dir.to_path_buf()), threads: 2, seed: None }
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Rows of a CSV file keyed by header.
fn read_rows(path: &Path) -> Vec<std::collections::HashMap<String, String>> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let headers = rdr.headers().unwrap().clone();
    rdr.records().map(|r| headers.iter().map(String::from).zip(r.unwrap().iter().map(String::from)).collect()).collect()
}

const HOPF_FREQUENCY: &str = r#"
[model]
kind = "hopf_bounded"
sigma = 0.3

[integrator]
dt = 0.01
t_end = 50.0
seed = 4

[experiment]
n_paths = 4
"#;

#[test]
fn repeated_runs_write_identical_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = run_experiment(Command::Frequency, HOPF_FREQUENCY, &opts(dir));
        assert_eq!(out.exit_code, 0, "{:?}", out.error);
    }
    for name in ["paths.csv", "frequency.csv", "survivors.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn thread_count_does_not_change_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let mut o = opts(&a);
    o.threads = 1;
    assert_eq!(run_experiment(Command::Frequency, HOPF_FREQUENCY, &o).exit_code, 0);
    o.out_dir = Some(b.clone());
    o.threads = 3;
    assert_eq!(run_experiment(Command::Frequency, HOPF_FREQUENCY, &o).exit_code, 0);
    assert_eq!(fs::read(a.join("paths.csv")).unwrap(), fs::read(b.join("paths.csv")).unwrap());
}

#[test]
fn deterministic_frequency_is_one_over_two_pi() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"
[model]
kind = "hopf_bounded"

[integrator]
dt = 0.001
t_end = 400.0

[experiment]
n_paths = 1
"#;
    let out = run_experiment(Command::Frequency, text, &opts(tmp.path()));
    assert_eq!(out.exit_code, 0, "{:?}", out.error);
    let rows = read_rows(&tmp.path().join("frequency.csv"));
    let c: f64 = rows[0]["c_sigma"].parse().unwrap();
    assert!((c - 1.0 / std::f64::consts::TAU).abs() < 5e-7, "{c}");
}

#[test]
fn conditions_above_threshold_are_reported_not_fatal() {
    let tmp = tempfile::tempdir().unwrap();
    let text = "[model]\nkind = \"hopf_bounded\"\nsigma = 0.6\n\n[integrator]\ndt = 0.01\nt_end = 1.0\n";
    let out = run_experiment(Command::CheckConditions, text, &opts(tmp.path()));
    assert_eq!(out.exit_code, 0);
    let report = read_json(&tmp.path().join("conditions.json"));
    assert_eq!(report["verdict"], "violated");
    assert_eq!(report["sigma_star"], 0.5);
}

#[test]
fn predator_prey_b0_paths_all_survive() {
    for sigma in [0.1, 0.3] {
        let tmp = tempfile::tempdir().unwrap();
        let text = format!(
            r#"
[model]
kind = "predator_prey"
noise = "B0"
sigma = {sigma}

[integrator]
dt = 0.01
t_end = 100.0
seed = 3

[experiment]
n_paths = 8
singularity_radius = 0.05
"#
        );
        let out = run_experiment(Command::Frequency, &text, &opts(tmp.path()));
        assert_eq!(out.exit_code, 0, "{:?}", out.error);
        let rows = read_rows(&tmp.path().join("frequency.csv"));
        assert_eq!(rows[0]["survivor_fraction"].parse::<f64>().unwrap(), 1.0, "sigma {sigma}");
    }
}

#[test]
fn every_preset_parses_and_resolves() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/presets");
    let mut seen = 0;
    let mut stack = vec![root];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
                continue;
            }
            let mut cfg = parse_config(&fs::read_to_string(&path).unwrap()).unwrap();
            let command = cfg.experiment.kind.unwrap_or_else(|| panic!("{} names no command", path.display()));
            cfg.resolve(command, None).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 20, "found {seen} presets");
}

#[test]
fn unknown_keys_are_rejected() {
    let text = "[model]\nkind = \"hopf_bounded\"\nsigmaa = 0.1\n\n[integrator]\ndt = 0.01\nt_end = 1.0\n";
    let err = parse_config(text).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("sigmaa"), "{err}");
}

fn binary(args: &[&str]) -> std::process::Output {
    Process::new(env!("CARGO_BIN_EXE_oscillab")).args(args).env("RUST_LOG", "off").output().unwrap()
}

#[test]
fn invalid_three_cycles_radii_exit_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(
        &cfg,
        "[model]\nkind = \"three_cycles\"\nparams = [1.0, 3.0, 2.0]\n\n[integrator]\ndt = 0.01\nt_end = 1.0\n",
    )
    .unwrap();
    let out = binary(&["find-cycle", "-c", cfg.to_str().unwrap(), "-o", tmp.path().join("out").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_config_file_exits_with_code_one() {
    let out = binary(&["simulate", "-c", "/nonexistent/oscillab.toml"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn extinction_exits_with_code_three_and_keeps_the_survivor_curve() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("b1.toml");
    fs::write(
        &cfg,
        r#"
[model]
kind = "predator_prey"
noise = "B1"
sigma = 1.0

[integrator]
dt = 0.01
t_end = 200.0
seed = 11

[experiment]
n_paths = 1
conditioning = "survivors_only"
singularity_radius = 0.05
"#,
    )
    .unwrap();
    let out_dir = tmp.path().join("out");
    let out = binary(&["frequency", "-c", cfg.to_str().unwrap(), "-o", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_rows(&out_dir.join("survivors.csv"));
    assert_eq!(rows.last().unwrap()["survivors"], "0");
    let manifest = read_json(&out_dir.join("manifest.json"));
    assert_eq!(manifest["exit_code"], 3);
}
