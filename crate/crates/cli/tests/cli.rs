//! End-to-end tests against the built binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_transhaz")
}

fn run(args: &[&str]) -> Output {
    Command::new(binary())
        .args(args)
        .env_remove("TRANSHAZ_SEED")
        .output()
        .expect("binary runs")
}

fn simulate_into(dir: &Path, n: usize, seed: u64) -> PathBuf {
    let out = run(&[
        "simulate",
        "--n",
        &n.to_string(),
        "--seed",
        &seed.to_string(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "simulate failed: {}", String::from_utf8_lossy(&out.stderr));
    dir.join("dataset.csv")
}

#[test]
fn missing_data_flag_exits_2_with_usage() {
    let out = run(&["fit", "--gamma", "0.5", "--intervals", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("--data"), "stderr: {stderr}");
}

#[test]
fn unknown_covariate_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulate_into(tmp.path(), 40, 5);
    let out = run(&[
        "fit",
        "--data",
        data.to_str().unwrap(),
        "--gamma",
        "0.5",
        "--intervals",
        "1",
        "--samples",
        "50",
        "--burn-in",
        "10",
        "--thin",
        "1",
        "--constrained-covariate",
        "nonexistent",
        "--out",
        tmp.path().join("fit").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nonexistent"));
}

#[test]
fn fit_writes_summary_samples_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulate_into(tmp.path(), 60, 11);
    let fit_dir = tmp.path().join("fit");
    let out = run(&[
        "fit",
        "--data",
        data.to_str().unwrap(),
        "--gamma",
        "0.5",
        "--intervals",
        "2",
        "--burn-in",
        "100",
        "--thin",
        "2",
        "--samples",
        "150",
        "--seed",
        "3",
        "--out",
        fit_dir.to_str().unwrap(),
        "--trace",
        fit_dir.join("trace.ndjson").to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fit_dir.join("summary.json")).unwrap())
            .unwrap();
    // p + J parameter entries
    assert_eq!(summary["summaries"].as_array().unwrap().len(), 4);
    assert_eq!(summary["config"]["gamma"], 0.5);
    assert!(summary["fit"]["b"].is_number());
    assert!(summary["fit"]["dic"].is_number());

    let samples = std::fs::read_to_string(fit_dir.join("samples.csv")).unwrap();
    let mut lines = samples.lines();
    assert_eq!(lines.next().unwrap(), "iter,beta_1,beta_2,lambda_1,lambda_2,loglik");
    assert_eq!(samples.lines().count(), 151);

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fit_dir.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["command"], "fit");
    assert_eq!(manifest["seed"], 3);
    assert!(manifest["input_digests"]
        .as_object()
        .unwrap()
        .keys()
        .any(|k| k.ends_with("dataset.csv")));

    let trace = std::fs::read_to_string(fit_dir.join("trace.ndjson")).unwrap();
    // burn_in + samples * thin sweeps
    assert_eq!(trace.lines().count(), 100 + 150 * 2);
    let first: serde_json::Value = serde_json::from_str(trace.lines().next().unwrap()).unwrap();
    assert_eq!(first["iteration"], 1);
    assert_eq!(first["burn_in"], true);
}

#[test]
fn fit_gamma_zero_runs_the_multiplicative_branch() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulate_into(tmp.path(), 50, 17);
    let out = run(&[
        "fit",
        "--data",
        data.to_str().unwrap(),
        "--gamma",
        "0",
        "--intervals",
        "1",
        "--burn-in",
        "50",
        "--thin",
        "1",
        "--samples",
        "100",
        "--out",
        tmp.path().join("fit0").to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn select_single_cell_and_default_grid_shape() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulate_into(tmp.path(), 60, 23);
    let single = tmp.path().join("single");
    let out = run(&[
        "select",
        "--data",
        data.to_str().unwrap(),
        "--gammas",
        "0.5",
        "--intervals-list",
        "1",
        "--burn-in",
        "50",
        "--thin",
        "1",
        "--samples",
        "100",
        "--out",
        single.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let grid = std::fs::read_to_string(single.join("grid.csv")).unwrap();
    assert_eq!(grid.lines().count(), 2);
    assert!(grid.lines().nth(1).unwrap().contains("best_by_B_and_DIC"));

    // default grids: 5 gammas x 3 interval counts
    let full = tmp.path().join("full");
    let out = run(&[
        "select",
        "--data",
        data.to_str().unwrap(),
        "--burn-in",
        "30",
        "--thin",
        "1",
        "--samples",
        "60",
        "--out",
        full.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let grid = std::fs::read_to_string(full.join("grid.csv")).unwrap();
    assert_eq!(grid.lines().count(), 16, "grid:\n{grid}");
}

#[test]
fn select_isolates_failed_cells() {
    let tmp = tempfile::tempdir().unwrap();
    // tiny dataset: J = 10 cannot have ten intervals with events
    let data = simulate_into(tmp.path(), 8, 29);
    let out_dir = tmp.path().join("sel");
    let out = run(&[
        "select",
        "--data",
        data.to_str().unwrap(),
        "--gammas",
        "0.5",
        "--intervals-list",
        "1,10",
        "--burn-in",
        "30",
        "--thin",
        "1",
        "--samples",
        "60",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let grid = std::fs::read_to_string(out_dir.join("grid.csv")).unwrap();
    assert!(grid.contains("failed:"), "grid:\n{grid}");
    assert!(grid.contains("best_by_B"), "grid:\n{grid}");
}

#[test]
fn simulate_respects_censoring_flags_and_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        let out = run(&["simulate", "--n", "300", "--seed", "99", "--out", dir.to_str().unwrap()]);
        assert!(out.status.success());
    }
    let csv_a = std::fs::read_to_string(a.join("dataset.csv")).unwrap();
    let csv_b = std::fs::read_to_string(b.join("dataset.csv")).unwrap();
    assert_eq!(csv_a, csv_b, "same seed must reproduce the dataset bytes");
    assert_eq!(csv_a.lines().count(), 301);
    let censored = csv_a.lines().skip(1).filter(|l| l.split(',').nth(1) == Some("0")).count();
    let rate = censored as f64 / 300.0;
    assert!((rate - 0.25).abs() < 0.1, "censoring rate {rate}");

    let none = tmp.path().join("none");
    let out = run(&[
        "simulate",
        "--n",
        "100",
        "--censoring",
        "none",
        "--seed",
        "7",
        "--out",
        none.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(none.join("dataset.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.split(',').nth(1) == Some("1")));

    let bad = run(&["simulate", "--censoring", "1.5", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn diagnose_reports_z_per_parameter_and_flags_constant_columns() {
    let tmp = tempfile::tempdir().unwrap();
    // synthetic samples file: one drifting column, one constant column
    let mut csv = String::from("iter,beta_1,lambda_1,loglik\n");
    let mut state = 42u64;
    let mut next = move || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    for i in 1..=500 {
        let z: f64 = next() - 0.5;
        csv.push_str(&format!("{i},{},{},{}\n", z, 1.25, -10.0 - z));
    }
    let samples = tmp.path().join("samples.csv");
    std::fs::write(&samples, csv).unwrap();
    let out_dir = tmp.path().join("diag");
    let out = run(&[
        "diagnose",
        "--samples",
        samples.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("diagnostics.json")).unwrap())
            .unwrap();
    let params = report["parameters"].as_array().unwrap();
    assert_eq!(params.len(), 2); // loglik excluded
    assert_eq!(params[0]["name"], "beta_1");
    assert!(params[0]["geweke_z"].is_number());
    assert_eq!(params[1]["constant"], true);
    assert!(params[1]["geweke_z"].is_null());

    let malformed = tmp.path().join("bad.csv");
    std::fs::write(&malformed, "not,a,samples\n1,2,3\n").unwrap();
    let out = run(&[
        "diagnose",
        "--samples",
        malformed.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn diagnose_summarizes_acceptance_from_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulate_into(tmp.path(), 50, 31);
    let fit_dir = tmp.path().join("fit");
    let trace = fit_dir.join("trace.ndjson");
    std::fs::create_dir_all(&fit_dir).unwrap();
    let out = run(&[
        "fit",
        "--data",
        data.to_str().unwrap(),
        "--gamma",
        "0.5",
        "--intervals",
        "1",
        "--burn-in",
        "50",
        "--thin",
        "1",
        "--samples",
        "200",
        "--out",
        fit_dir.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let diag_dir = tmp.path().join("diag");
    let out = run(&[
        "diagnose",
        "--samples",
        fit_dir.join("samples.csv").to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
        "--out",
        diag_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(diag_dir.join("diagnostics.json")).unwrap())
            .unwrap();
    let acceptance = &report["acceptance"];
    assert_eq!(acceptance["iterations"], 250);
    let rate = acceptance["lambda_acceptance"][0].as_f64().unwrap();
    assert!(rate > 0.05 && rate < 0.95, "acceptance {rate}");
}

#[test]
fn env_variables_override_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("env");
    let out = Command::new(binary())
        .args(["simulate", "--n", "20", "--out", dir.to_str().unwrap()])
        .env("TRANSHAZ_SEED", "777")
        .output()
        .unwrap();
    assert!(out.status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 777);
}

#[test]
fn help_lists_flags_with_reference_defaults() {
    let out = run(&["fit", "--help"]);
    let text = String::from_utf8_lossy(&out.stdout);
    for needle in [
        "--sigma",
        "default: 100",
        "--alpha",
        "default: 2",
        "--xi",
        "default: 0.01",
        "--burn-in",
        "default: 2000",
        "--thin",
        "default: 5",
        "--samples",
        "default: 10000",
        "--constrained-covariate",
    ] {
        assert!(text.contains(needle), "missing {needle} in fit --help:\n{text}");
    }
    let out = run(&["select", "--help"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("0,0.25,0.5,0.75,1"));
    assert!(text.contains("1,5,10"));
    let out = run(&["simulate", "--help"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("normal(5,1),binary(1,2,0.5)"));
    assert!(text.contains("default: 300"));
}

#[test]
fn select_with_no_viable_cells_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulate_into(tmp.path(), 8, 43);
    let out = run(&[
        "select",
        "--data",
        data.to_str().unwrap(),
        "--gammas",
        "0.5",
        "--intervals-list",
        "50",
        "--burn-in",
        "10",
        "--thin",
        "1",
        "--samples",
        "20",
        "--out",
        tmp.path().join("sel").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn rerun_from_manifest_reproduces_outputs_bit_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulate_into(tmp.path(), 50, 37);
    let fit_dir = tmp.path().join("fit");
    let out = run(&[
        "fit",
        "--data",
        data.to_str().unwrap(),
        "--gamma",
        "0.5",
        "--intervals",
        "1",
        "--burn-in",
        "50",
        "--thin",
        "1",
        "--samples",
        "120",
        "--seed",
        "55",
        "--out",
        fit_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let samples_first = std::fs::read(fit_dir.join("samples.csv")).unwrap();
    let summary_first = std::fs::read(fit_dir.join("summary.json")).unwrap();

    // rerun overwrites the same output directory from the manifest alone
    let out = run(&[
        "rerun",
        "--manifest",
        fit_dir.join("manifest.json").to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(samples_first, std::fs::read(fit_dir.join("samples.csv")).unwrap());
    assert_eq!(summary_first, std::fs::read(fit_dir.join("summary.json")).unwrap());
}

#[test]
fn fit_emits_survival_hazard_and_group_curves() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulate_into(tmp.path(), 60, 41);
    let fit_dir = tmp.path().join("fit");
    let out = run(&[
        "fit",
        "--data",
        data.to_str().unwrap(),
        "--gamma",
        "0.5",
        "--intervals",
        "1",
        "--burn-in",
        "50",
        "--thin",
        "1",
        "--samples",
        "100",
        "--out",
        fit_dir.to_str().unwrap(),
        "--survival-profile",
        "5,1",
        "--survival-times",
        "0,0.05,0.1,0.15",
        "--nelson-aalen",
        "z2",
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let survival = std::fs::read_to_string(fit_dir.join("survival.csv")).unwrap();
    assert!(survival.starts_with("time,survival\n"));
    assert_eq!(survival.lines().count(), 5);
    let first: f64 = survival.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert_eq!(first, 1.0, "survival at t = 0");
    let hazard = std::fs::read_to_string(fit_dir.join("hazard.csv")).unwrap();
    assert!(hazard.starts_with("time,hazard\n"));
    assert_eq!(hazard.lines().count(), 4); // t = 0 excluded
    let na = std::fs::read_to_string(fit_dir.join("nelson_aalen.csv")).unwrap();
    assert!(na.starts_with("group,time,cumulative_hazard\n"));
    assert!(na.contains("z2=1"));
    assert!(na.contains("z2=2"));
}
