//! End-to-end checks of the command-line surface: exit codes, file outputs,
//! and determinism of the sweep CSV.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use grasp::data::{fmt_f64, gen_ar1_features, read_parameter, trial_rng, GenConfig};
use grasp::sparse::DenseVector;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_grasp"))
}

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("grasp-cli-tests").join(name);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("spawn grasp binary")
}

/// Noiseless linear fixture with real-valued targets.
fn write_linear_fixture(dir: &Path) -> (PathBuf, DenseVector) {
    let cfg = GenConfig {
        p: 12,
        s: 2,
        rho: 0.0,
        n: 40,
        seed: 5,
        intercept: false,
    };
    let mut rng = trial_rng(cfg.seed, 0);
    let a = gen_ar1_features(&cfg, &mut rng).unwrap();
    let mut x_star = DenseVector::zeros(12);
    x_star[3] = 1.5;
    x_star[7] = -0.5;
    let y = &a * &x_star;

    let mut text = String::from("y");
    for j in 1..=12 {
        text.push_str(&format!(",x{j}"));
    }
    text.push('\n');
    for i in 0..40 {
        text.push_str(&fmt_f64(y[i]));
        for j in 0..12 {
            text.push(',');
            text.push_str(&fmt_f64(a[(i, j)]));
        }
        text.push('\n');
    }
    let path = dir.join("linear.csv");
    fs::write(&path, text).unwrap();
    (path, x_star)
}

#[test]
fn gen_data_then_solve_logistic() {
    let dir = workdir("gen-solve");
    let data = dir.join("data.csv");
    let out = run(bin().args([
        "gen-data",
        "--p",
        "25",
        "--sparsity",
        "3",
        "--n",
        "200",
        "--seed",
        "11",
        "--intercept",
        "--out",
        data.to_str().unwrap(),
    ]));
    assert!(out.status.success(), "{out:?}");
    assert!(data.exists());
    assert!(dir.join("data.params.csv").exists());

    let fit = dir.join("fit");
    let out = run(bin().args([
        "solve",
        "--data",
        data.to_str().unwrap(),
        "--method",
        "grasp_debias",
        "--sparsity",
        "3",
        "--intercept",
        "--out",
        fit.to_str().unwrap(),
    ]));
    assert!(out.status.success(), "{out:?}");
    let (estimate, _c) = read_parameter(dir.join("fit.estimate.csv"), 25).unwrap();
    assert!(estimate.iter().filter(|v| **v != 0.0).count() <= 3);
    assert!(dir.join("fit.trace.csv").exists());
}

#[test]
fn solve_recovers_noiseless_linear_fixture() {
    let dir = workdir("linear");
    let (path, x_star) = write_linear_fixture(&dir);
    let fit = dir.join("fit");
    let out = run(bin().args([
        "solve",
        "--data",
        path.to_str().unwrap(),
        "--objective",
        "squared-error",
        "--sparsity",
        "2",
        "--out",
        fit.to_str().unwrap(),
    ]));
    assert!(out.status.success(), "{out:?}");
    let (estimate, c) = read_parameter(dir.join("fit.estimate.csv"), 12).unwrap();
    let rel = (&estimate - &x_star).norm() / x_star.norm();
    assert!(rel < 1e-8, "relative error {rel}");
    assert_eq!(c, 0.0);
}

#[test]
fn mismatched_dimension_flag_fails_with_usage_code() {
    let dir = workdir("mismatch");
    let (path, _) = write_linear_fixture(&dir);
    let out = run(bin().args([
        "solve",
        "--data",
        path.to_str().unwrap(),
        "--objective",
        "squared-error",
        "--sparsity",
        "2",
        "--p",
        "13",
        "--out",
        dir.join("fit").to_str().unwrap(),
    ]));
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn unknown_method_is_a_usage_error() {
    let dir = workdir("badmethod");
    let (path, _) = write_linear_fixture(&dir);
    let out = run(bin().args([
        "solve",
        "--data",
        path.to_str().unwrap(),
        "--method",
        "lasso",
        "--sparsity",
        "2",
        "--out",
        dir.join("fit").to_str().unwrap(),
    ]));
    assert_eq!(out.status.code(), Some(2), "{out:?}");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("lasso"), "{stderr}");
}

#[test]
fn divergent_solve_exits_with_runtime_code() {
    let dir = workdir("diverge");
    let (path, _) = write_linear_fixture(&dir);
    // An absurd step size overflows the loss immediately.
    let out = run(bin().args([
        "solve",
        "--data",
        path.to_str().unwrap(),
        "--objective",
        "squared-error",
        "--method",
        "grasp_iht",
        "--kappa",
        "1e200",
        "--sparsity",
        "2",
        "--out",
        dir.join("fit").to_str().unwrap(),
    ]));
    assert_eq!(out.status.code(), Some(3), "{out:?}");
}

#[test]
fn sweep_is_complete_and_deterministic() {
    let dir = workdir("sweep");
    let args = |out: &PathBuf| {
        vec![
            "sweep".to_string(),
            "--p".into(),
            "20".into(),
            "--sparsity".into(),
            "2".into(),
            "--n-grid".into(),
            "40".into(),
            "--rho-grid".into(),
            "0".into(),
            "--trials".into(),
            "2".into(),
            "--methods".into(),
            "grasp,logit_omp".into(),
            "--seed".into(),
            "3".into(),
            "--out".into(),
            out.to_str().unwrap().into(),
        ]
    };
    let first = dir.join("a.csv");
    let second = dir.join("b.csv");
    assert!(run(bin().args(args(&first))).status.success());
    assert!(run(bin().args(args(&second))).status.success());

    let a = fs::read(&first).unwrap();
    let b = fs::read(&second).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    // Header plus |rho| * |n| * trials * methods rows.
    assert_eq!(text.lines().count(), 1 + 4);
    assert!(dir.join("a.summary.csv").exists());
}

#[test]
fn certify_srh_reports_conditioning() {
    let dir = workdir("certify");
    let data = dir.join("data.csv");
    assert!(run(bin().args([
        "gen-data",
        "--p",
        "15",
        "--sparsity",
        "2",
        "--n",
        "120",
        "--seed",
        "9",
        "--out",
        data.to_str().unwrap(),
    ]))
    .status
    .success());

    let cert = dir.join("cert.csv");
    let out = run(bin().args([
        "certify-srh",
        "--data",
        data.to_str().unwrap(),
        "--objective",
        "logistic",
        "--eta",
        "0.1",
        "--k",
        "2",
        "--budget",
        "40",
        "--out",
        cert.to_str().unwrap(),
    ]));
    assert!(out.status.success(), "{out:?}");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("mu_k"), "{stdout}");
    assert!(stdout.contains("valid: true"), "{stdout}");
    let cert_text = fs::read_to_string(&cert).unwrap();
    assert!(cert_text.starts_with("k,mode,valid,b_min,a_max,mu_k\n"));
}
