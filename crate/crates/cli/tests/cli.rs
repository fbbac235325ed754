use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn polyshoot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polyshoot"))
        .args(args)
        .env_remove("POLYSHOOT_CACHE")
        .output()
        .expect("run polyshoot")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

/// Data rows (header included) of a CSV, without `#` comments.
fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

fn column(rows: &[Vec<String>], name: &str) -> Vec<f64> {
    let i = rows[0]
        .iter()
        .position(|c| c == name)
        .expect("column present");
    rows[1..].iter().map(|r| r[i].parse().unwrap()).collect()
}

#[test]
fn verify_m2_reports_lambda_star() {
    let out = polyshoot(&["verify", "--m", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let report = stdout_json(&out);
    assert_eq!(report["pass"], true);
    let ls = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["check"] == "lambda_star")
        .unwrap();
    assert!((ls["value"].as_f64().unwrap() - 18.8065).abs() < 1e-4);
    assert_eq!(ls["pass"], true);
}

#[test]
fn verify_m3_checks_u1() {
    let out = polyshoot(&["verify", "--m", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let report = stdout_json(&out);
    let checks = report["checks"].as_array().unwrap();
    assert!(checks
        .iter()
        .any(|c| c["check"].as_str().unwrap().starts_with("U1 residual")));
    assert!(checks.iter().all(|c| c["pass"] == true));
}

#[test]
fn verify_with_unattainable_tolerance_fails() {
    let out = polyshoot(&["verify", "--m", "2", "--tol", "1e-30"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("rel_tol"));
}

#[test]
fn shoot_m2_positive_rho_is_quadratic() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("traj.csv");
    let out = polyshoot(&[
        "shoot",
        "--m",
        "2",
        "--rho",
        "0.5",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let summary = String::from_utf8_lossy(&out.stdout);
    assert!(summary.contains("EntirePositive"));
    let gamma: f64 = summary
        .lines()
        .find_map(|l| l.strip_prefix("growth exponent: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((gamma - 2.0).abs() < 0.05);

    let text = std::fs::read_to_string(&path).unwrap();
    let rows = rows(&text);
    assert_eq!(rows[0], ["r", "u", "u1", "lap_u", "lap_u1"]);
    assert!(text
        .lines()
        .last()
        .unwrap()
        .starts_with("# verdict EntirePositive"));
    let r = column(&rows, "r");
    assert_eq!(r[0], 0.0);
    assert_eq!(*r.last().unwrap(), 1000.0);
}

#[test]
fn shoot_m2_negative_rho_collapses() {
    let out = polyshoot(&["shoot", "--m", "2", "--rho", "-0.2"]);
    assert_eq!(out.status.code(), Some(0));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("Collapsed"));
    let r_star: f64 = stderr
        .lines()
        .find_map(|l| l.strip_prefix("r*: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(r_star > 0.0 && r_star < 10.0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("# verdict Collapsed"));
}

#[test]
fn shoot_m3_has_second_laplacian_columns() {
    let out = polyshoot(&["shoot", "--m", "3", "--k", "10", "--eps", "0.1"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(
        rows[0],
        ["r", "u", "u1", "lap_u", "lap_u1", "lap2_u", "lap2_u1"]
    );
    assert!(rows[1..].iter().all(|r| r.len() == 7));
}

#[test]
fn shoot_requires_matching_jet_flags() {
    assert_eq!(
        polyshoot(&["shoot", "--m", "3", "--rho", "1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        polyshoot(&["shoot", "--m", "4", "--rho", "1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        polyshoot(&["shoot", "--m", "2", "--jet", "1,2,3"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        polyshoot(&["shoot", "--m", "2", "--jet", "1,2"])
            .status
            .code(),
        Some(0)
    );
}

#[test]
fn sweep_m2_decreases_from_lambda_star() {
    let out = polyshoot(&["sweep", "--m", "2", "--rho", "0:5:0.25"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = rows(&String::from_utf8(out.stdout).unwrap());
    let rho = column(&rows, "rho");
    let vol = column(&rows, "volume");
    let ls = column(&rows, "lambda_star")[0];
    assert_eq!(rho.len(), 21);
    assert!(rho.windows(2).all(|w| w[0] < w[1]));
    assert!((vol[0] - ls).abs() < 1e-4 * ls);
    assert!(vol.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn sweep_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let out = polyshoot(&[
            "sweep",
            "--m",
            "2",
            "--rho",
            "0:2:0.5",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
        std::fs::read_to_string(path).unwrap()
    };
    let strip = |t: String| -> String {
        t.lines()
            .filter(|l| !l.starts_with("# generated_unix") && !l.starts_with("# config"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip(run("a.csv")), strip(run("b.csv")));
}

#[test]
fn sweep_m3_at_critical_increases_and_caches() {
    let cache = tempfile::tempdir().unwrap();
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_polyshoot"))
            .args([
                "sweep",
                "--m",
                "3",
                "--k",
                "10,20,40",
                "--at-critical",
                "--bracket-tol",
                "1e-5",
            ])
            .env("POLYSHOOT_CACHE", cache.path())
            .output()
            .unwrap()
    };
    let first = run();
    assert_eq!(first.status.code(), Some(0));
    let rows1 = rows(&String::from_utf8(first.stdout).unwrap());
    let vol = column(&rows1, "volume");
    assert!(vol.windows(2).all(|w| w[1] > w[0]));
    assert!(rows1[1..].iter().all(|r| r[4] == "false"));
    assert!(cache.path().join("polyshoot-cache.json").exists());

    let rows2 = rows(&String::from_utf8(run().stdout).unwrap());
    assert!(rows2[1..].iter().all(|r| r[4] == "true"));
    assert_eq!(column(&rows2, "volume"), vol);
}

#[test]
fn sweep_rejects_empty_or_malformed_ranges() {
    assert_eq!(
        polyshoot(&["sweep", "--m", "2", "--rho", "3:1:0.5"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        polyshoot(&["sweep", "--m", "2", "--rho", "0:1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        polyshoot(&["sweep", "--m", "3", "--k", "10"]).status.code(),
        Some(2)
    );
}

#[test]
fn critical_eps_k10() {
    let out = polyshoot(&["critical-eps", "--m", "3", "--k", "10"]);
    assert_eq!(out.status.code(), Some(0));
    let report = stdout_json(&out);
    let ce = &report["critical"];
    assert!(ce["width"].as_f64().unwrap() <= 1e-6);
    let eps = ce["eps_star"].as_f64().unwrap();
    assert!(eps > 0.0 && eps <= (12.0f64).sqrt());
    assert!(report["residual"]["partial_integral"].as_f64().unwrap() >= 0.9);
    assert!(ce["history"].as_array().unwrap().len() > 10);
    assert!(report["table_entry"].is_null());
}

#[test]
fn critical_eps_is_m3_only() {
    assert_eq!(
        polyshoot(&["critical-eps", "--m", "2", "--k", "10"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        polyshoot(&["critical-eps", "--m", "3", "--k", "1"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn prescribe_volume_m2() {
    let out = polyshoot(&["prescribe-volume", "--m", "2", "--lambda", "9.4"]);
    assert_eq!(out.status.code(), Some(0));
    let solve = &stdout_json(&out)["solve"];
    assert_eq!(solve["parameter"]["kind"], "Rho");
    assert!(solve["parameter"]["rho"].as_f64().unwrap() > 0.0);
    assert!((solve["achieved"].as_f64().unwrap() - 9.4).abs() <= 1e-5 * 9.4);
}

#[test]
fn prescribe_volume_above_lambda_star_is_out_of_range() {
    let out = polyshoot(&["prescribe-volume", "--m", "2", "--lambda", "25"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("out of range"));
}

#[test]
fn prescribe_volume_m3_table_exhausted() {
    let out = polyshoot(&[
        "prescribe-volume",
        "--m",
        "3",
        "--lambda",
        "1e4",
        "--k-table",
        "10",
        "--bracket-tol",
        "1e-4",
    ]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn config_file_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"schema": 1, "m": 3, "r_max": 20.0}"#).unwrap();
    let out = polyshoot(&[
        "shoot",
        "--config",
        cfg.to_str().unwrap(),
        "--k",
        "10",
        "--eps",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(*column(&rows(&text), "r").last().unwrap(), 20.0);

    // flags win over the file
    let out = polyshoot(&[
        "shoot",
        "--config",
        cfg.to_str().unwrap(),
        "--r-max",
        "5",
        "--k",
        "10",
        "--eps",
        "0",
    ]);
    assert_eq!(
        *column(&rows(&String::from_utf8(out.stdout).unwrap()), "r")
            .last()
            .unwrap(),
        5.0
    );

    std::fs::write(&cfg, r#"{"schema": 7}"#).unwrap();
    assert_eq!(
        polyshoot(&["verify", "--config", cfg.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn unwritable_output_is_a_usage_error() {
    let out = polyshoot(&["verify", "--out", "/nonexistent-dir/report.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!Path::new("/nonexistent-dir/report.json").exists());
}
