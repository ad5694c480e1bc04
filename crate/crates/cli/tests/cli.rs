//! Black-box tests of the binary: exit codes, artifact presence, config
//! handling, and the failure surfaces of each subcommand.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sigma-pvi"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("sigma-pvi-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&bin().arg("--help").output().unwrap()), 0);
    assert_eq!(code(&bin().arg("--version").output().unwrap()), 0);
    assert_eq!(
        code(&bin().args(["solve", "--help"]).output().unwrap()),
        0
    );
}

#[test]
fn bad_usage_exits_64() {
    // Unknown flag, missing subcommand, malformed flag value.
    assert_eq!(code(&bin().arg("--bogus").output().unwrap()), 64);
    assert_eq!(code(&bin().output().unwrap()), 64);
    assert_eq!(
        code(&bin().args(["solve", "--tol", "abc"]).output().unwrap()),
        64
    );
    // Unreadable and malformed configs.
    assert_eq!(
        code(
            &bin()
                .args(["solve", "--config", "/definitely/not/here.json"])
                .output()
                .unwrap()
        ),
        64
    );
    let dir = scratch("badcfg");
    let cfg = dir.join("cfg.json");
    fs::write(&cfg, r#"{"tolerance": 1e-9}"#).unwrap();
    let out = bin()
        .args(["solve", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(code(&out), 64);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("unknown field"), "stderr was: {err}");
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn verify_identities_writes_the_report() {
    let dir = scratch("ids");
    let out = bin()
        .args(["verify-identities", "--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    let text = fs::read_to_string(dir.join("identities.json")).unwrap();
    let report: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(report["report"]["all_passed"], serde_json::Value::Bool(true));
    assert_eq!(report["report"]["tau_prefactor"], serde_json::json!(4));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("all_passed: true"));
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn solve_honors_config_file_and_flag_precedence() {
    let dir = scratch("solvecfg");
    let cfg = dir.join("cfg.json");
    // Default grid (the residual certificate needs its resolution), loose
    // tolerance for speed; the seed in the file loses to the flag.
    fs::write(
        &cfg,
        r#"{
            "parameters": {"nu1": [1,0], "nu3": [1,0], "nu4": [1,0], "C": [0.5,0]},
            "tol": 1e-9,
            "seed": 3
        }"#,
    )
    .unwrap();
    let out = bin()
        .args(["solve", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(&dir)
        .args(["--seed", "11"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let conv: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("convergence.json")).unwrap()).unwrap();
    assert_eq!(conv["config"]["tol"], serde_json::json!(1e-9));
    assert_eq!(conv["config"]["seed"], serde_json::json!(11));
    assert_eq!(conv["config"]["parameters"]["C"], serde_json::json!([0.5, 0.0]));
    assert_eq!(conv["converged"], serde_json::Value::Bool(true));
    assert_eq!(conv["exit_code"], serde_json::json!(0));

    let csv = fs::read_to_string(dir.join("solution.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t_re,t_im,delta1_re,delta1_im,delta2_re,delta2_im,u_re,u_im,residual_abs"
    );
    assert_eq!(lines.count(), 4096, "one row per grid node");

    let cert: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("certificate.json")).unwrap()).unwrap();
    assert_eq!(cert["certificate"]["ball_mapped"], serde_json::Value::Bool(true));
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn solve_reports_non_convergence_with_exit_3() {
    let dir = scratch("hardtol");
    let out = bin()
        .args(["solve", "--tol", "1e-30", "--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(code(&out), 3);
    let conv: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("convergence.json")).unwrap()).unwrap();
    assert_eq!(conv["converged"], serde_json::Value::Bool(false));
    assert_eq!(conv["exit_code"], serde_json::json!(3));
    assert!(conv["error"].as_str().unwrap().contains("refine the grid"));
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn sweep_writes_one_row_per_constant_and_rejects_bad_literals() {
    let dir = scratch("sweep");
    let cfg = dir.join("cfg.json");
    fs::write(
        &cfg,
        r#"{"grid": {"rho": 50, "theta": 0, "t_max": 500000, "n": 1024, "grading": "geometric"},
            "tol": 1e-9}"#,
    )
    .unwrap();
    let out = bin()
        .args(["sweep", "--c-list", "1,0.5,1i,0", "--workers", "2", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 5, "header plus four rows");
    assert!(lines[0].starts_with("c_re,c_im,converged"));
    assert!(lines[1].starts_with("1,0,true,"));
    assert!(lines[4].starts_with("0,0,true,0,"), "trivial row: {}", lines[4]);

    let bad = bin()
        .args(["sweep", "--c-list", "1,2+"])
        .args(["--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(code(&bad), 64);
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn residual_round_trips_a_table() {
    let dir = scratch("residual");
    let input = dir.join("in.csv");
    // Second row: the affine solution at t = 10 for unit parameters, which
    // zeroes the equation; first row perturbs the first derivative.
    fs::write(
        &input,
        "t_re,t_im,u_re,u_im,up_re,up_im,upp_re,upp_im\n\
         20,0,-19,0,-1.01,0,0.001,0\n\
         10,0,-9,0,-1,0,0,0\n",
    )
    .unwrap();
    let out = bin()
        .args(["residual", "--input"])
        .arg(&input)
        .args(["--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    let text = fs::read_to_string(dir.join("residual.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].ends_with("residual_abs,residual_rel"));
    assert!(lines[2].ends_with(",0,0"), "exact row stays exact: {}", lines[2]);

    // A header mismatch is bad usage.
    let wrong = dir.join("wrong.csv");
    fs::write(&wrong, "t,u\n1,2\n").unwrap();
    let out = bin()
        .args(["residual", "--input"])
        .arg(&wrong)
        .args(["--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(code(&out), 64);
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn contraction_report_covers_the_radius_list() {
    let dir = scratch("contraction");
    let cfg = dir.join("cfg.json");
    fs::write(
        &cfg,
        r#"{"grid": {"rho": 50, "theta": 0, "t_max": 500000, "n": 1024, "grading": "geometric"},
            "tol": 1e-9, "samples": 4}"#,
    )
    .unwrap();
    let out = bin()
        .args(["contraction-report", "--rho-list", "50,100", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("contraction.json")).unwrap()).unwrap();
    let rows = report["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["rho"], serde_json::json!(50.0));
    assert!(rows[1]["contraction_ratio"].as_f64().unwrap()
        < rows[0]["contraction_ratio"].as_f64().unwrap());

    let bad = bin()
        .args(["contraction-report", "--rho-list", "0.5"])
        .args(["--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(code(&bad), 64);
    let _ = fs::remove_dir_all(&dir);
}
