use std::fs;
use std::path::Path;
use std::process::Command;

use covdet_cli::manifest_path;

const SMALL: &str = "
[scenario]
num_sensors = 12
rho = 0.8
sigma_s2 = 1.0
sigma_v2 = 0.5
sigma_w2 = 0.1

[projection]
compression_ratio = 0.5

[detector]
T = 10
alpha0 = 0.1
beta_db = 2.0

[run]
trials = 600
seed = 5
";

fn covdet(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_covdet"))
        .args(args)
        .env_remove("COVDET_WORKERS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("plan.toml");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn run_ok(args: &[&str]) {
    let out = covdet(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn roc_is_byte_identical_across_runs_and_workers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let mut csvs = Vec::new();
    for (name, workers) in [("a", "1"), ("b", "1"), ("c", "3"), ("d", "0")] {
        let out = dir.path().join(name);
        run_ok(&[
            "roc",
            "--config",
            &cfg,
            "--seed",
            "42",
            "--workers",
            workers,
            "--out-dir",
            out.to_str().unwrap(),
        ]);
        csvs.push(fs::read(out.join("roc.csv")).unwrap());
    }
    assert!(csvs.windows(2).all(|w| w[0] == w[1]));
    assert!(csvs[0].starts_with(b"pf,pd\n1,1\n"));
    assert!(!csvs[0].contains(&b'\r'));
}

#[test]
fn workers_env_var_is_honoured() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("o");
    let env_run = Command::new(env!("CARGO_BIN_EXE_covdet"))
        .args(["rates", "--config", &cfg, "--out-dir", out.to_str().unwrap()])
        .env("COVDET_WORKERS", "2")
        .output()
        .unwrap();
    assert!(env_run.status.success());
    let seq = dir.path().join("s");
    run_ok(&[
        "rates",
        "--config",
        &cfg,
        "--workers",
        "1",
        "--out-dir",
        seq.to_str().unwrap(),
    ]);
    assert_eq!(
        fs::read(out.join("rates.csv")).unwrap(),
        fs::read(seq.join("rates.csv")).unwrap()
    );

    let bad = Command::new(env!("CARGO_BIN_EXE_covdet"))
        .args(["rates", "--config", &cfg, "--out-dir", out.to_str().unwrap()])
        .env("COVDET_WORKERS", "many")
        .output()
        .unwrap();
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("COVDET_WORKERS"));
}

#[test]
fn single_sensor_is_rejected_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("num_sensors = 12", "num_sensors = 1"));
    let out = covdet(&["roc", "--config", &cfg, "--out-dir", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("num_sensors"), "{err}");
    assert!(!dir.path().join("roc.csv").exists());
}

#[test]
fn missing_config_is_an_io_error() {
    let out = covdet(&["rates", "--config", "/nonexistent/plan.toml"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/plan.toml"));
}

#[test]
fn unknown_subcommand_fails() {
    assert!(!covdet(&["explode", "--config", "x"]).status.success());
}

#[test]
fn calibrate_emits_one_row_per_noise_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("o");
    run_ok(&[
        "calibrate",
        "--config",
        &cfg,
        "--noise-db",
        "-10,-5,0,5,10",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    let csv = fs::read_to_string(out.join("calibrate.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("noise_db,tau_c"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 5);
    for (row, db) in rows.iter().zip([-10.0, -5.0, 0.0, 5.0, 10.0]) {
        assert_eq!(row.len(), 2);
        assert_eq!(row[0], db);
        assert!(row[1] >= 1.0);
    }
}

#[test]
fn csv_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("o");
    let o = out.to_str().unwrap();
    run_ok(&["rates", "--config", &cfg, "--out-dir", o]);
    run_ok(&["sweep-snr", "--config", &cfg, "--snr-db", "-4,0", "--out-dir", o]);
    run_ok(&[
        "sweep-sparsity",
        "--config",
        &cfg,
        "--snr-db=-4,0",
        "--s0",
        "1,12",
        "--out-dir",
        o,
    ]);

    let rates = fs::read_to_string(out.join("rates.csv")).unwrap();
    let labels: Vec<&str> = rates.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert!(rates.starts_with("detector,tau,pf,pf_hw,pd,pd_hw\n"));
    assert_eq!(labels, ["covariance", "energy", "energy_beta2"]);

    let snr = fs::read_to_string(out.join("sweep-snr.csv")).unwrap();
    assert!(snr.starts_with("gamma0_db,detector,pf,pd,pf_hw,pd_hw\n"));
    assert_eq!(snr.lines().count(), 1 + 2 * 3);

    let sparsity = fs::read_to_string(out.join("sweep-sparsity.csv")).unwrap();
    assert!(sparsity.starts_with("s0,gamma0_db,pd,pd_hw\n"));
    let s0: Vec<&str> = sparsity.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(s0, ["1", "1", "12", "12", "orthonormal", "orthonormal"]);
}

#[test]
fn manifest_alone_reproduces_the_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let first = dir.path().join("first");
    run_ok(&[
        "roc",
        "--config",
        &cfg,
        "--seed",
        "77",
        "--out-dir",
        first.to_str().unwrap(),
    ]);

    let manifest = fs::read_to_string(manifest_path(&first, "roc")).unwrap();
    assert!(manifest.contains("seed = 77\n"));
    assert!(manifest.contains("tool_version = "));
    assert!(manifest.contains("duration_seconds = "));
    let csv = first.join("roc.csv");
    assert_eq!(manifest.matches(csv.to_str().unwrap()).count(), 1);

    let echo = manifest.split("\n[config]\n").nth(1).unwrap();
    let replay_cfg = dir.path().join("replay.toml");
    fs::write(&replay_cfg, echo).unwrap();
    let second = dir.path().join("second");
    run_ok(&[
        "roc",
        "--config",
        replay_cfg.to_str().unwrap(),
        "--out-dir",
        second.to_str().unwrap(),
    ]);
    assert_eq!(fs::read(csv).unwrap(), fs::read(second.join("roc.csv")).unwrap());
}

#[test]
fn unreachable_snr_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    // sigma_s2 / sigma_w2 = 10 dB caps the attainable SNR
    let out = covdet(&[
        "sweep-snr",
        "--config",
        &cfg,
        "--snr-db",
        "12",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--snr-db"));
}
