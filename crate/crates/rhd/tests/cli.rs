use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rhd::format::load_dataset;
use rhd_core::data::GeneratorSpec;
use rhd_core::evaluation::{EvalReport, OracleResult};
use rhd_core::trainers::{Algorithm, TrainConfig, TrainTrace};
use rhd_core::{AttackSpec, Exponent, LossSpec, WeightVector};

fn rhd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rhd")).args(args).output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const FIXTURE: &str = "rhd v1 n=3 d=2 p=none bound=none\n1 1 0\n1 -1 0\n-1 0 1\n";

#[test]
fn gen_writes_the_header_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("data.rhd");
    let out = rhd(&["gen", "--family", "gaussian", "--d", "10", "--n", "10000", "--noise", "random:0.1", "--seed", "7", "-o", path(&file)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(&file).unwrap();
    assert!(text.starts_with("rhd v1 n=10000 d=10 "));
    assert!(stdout(&out).contains("flipped="));
    let ds = load_dataset(&file).unwrap();
    assert_eq!((ds.n(), ds.d()), (10000, 10));

    let again = dir.path().join("again.rhd");
    let out = rhd(&["gen", "--family", "gaussian", "--d", "10", "--n", "10000", "--noise", "random:0.1", "--seed", "7", "-o", path(&again)]);
    assert!(out.status.success());
    assert_eq!(fs::read(&file).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn hard_margin_rows_clear_the_band() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("hm.rhd");
    let out = rhd(&["gen", "--family", "hard-margin", "--gamma0", "0.2", "--teacher", "e1", "--d", "3", "--n", "500", "-o", path(&file)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let ds = load_dataset(&file).unwrap();
    assert!(ds.rows().all(|x| x[0].abs() >= 0.2));

    let out = rhd(&["eval", "--weights", "e1", "--data", path(&file), "--r", "0.1"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report: EvalReport = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report.robust_error, 0.0);
}

#[test]
fn missing_dimension_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = rhd(&["gen", "--n", "10", "-o", path(&dir.path().join("x.rhd"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--d"));
}

#[test]
fn sgd_rejects_the_hinge_loss_before_training() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.json");
    let out = rhd(&["train", "--algo", "sgd", "--loss", "hinge", "--r", "0.1", "--k", "10", "--stream", "--d", "3", "-o", path(&trace)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("smooth"), "{}", stderr(&out));
    assert!(!trace.exists());
}

#[test]
fn psat_sigma_auto_follows_the_radius() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.json");
    let out = rhd(&[
        "train", "--algo", "psat", "--p", "inf", "--r", "0.02", "--sigma", "auto", "--eta", "0.001", "--k", "200", "--stream", "--d", "4",
        "-o", path(&trace),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let trace: TrainTrace = serde_json::from_str(&fs::read_to_string(&trace).unwrap()).unwrap();
    assert_eq!(trace.config.loss, LossSpec::Sigmoidal { sigma: 0.02 });
    assert_eq!(trace.config.attack.p(), Exponent::Infinity);
    let norm: f64 = trace.final_weights().iter().map(|v| v.abs()).sum();
    assert!((norm - 1.0).abs() < 1e-9);
}

#[test]
fn train_then_eval_the_trace() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.rhd");
    let validation = dir.path().join("v.rhd");
    let trace = dir.path().join("t.json");
    assert!(rhd(&["gen", "--d", "3", "--n", "300", "--noise", "random:0.05", "--seed", "1", "-o", path(&data)]).status.success());
    assert!(rhd(&["gen", "--d", "3", "--n", "300", "--noise", "random:0.05", "--seed", "2", "-o", path(&validation)]).status.success());
    let out = rhd(&[
        "train", "--algo", "gd", "--loss", "xent", "--p", "2", "--r", "0.05", "--eta", "0.05", "--k", "200", "--data", path(&data),
        "--validation", path(&validation), "-o", path(&trace),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("robust_error="));
    let parsed: TrainTrace = serde_json::from_str(&fs::read_to_string(&trace).unwrap()).unwrap();
    assert!(parsed.best_index.is_some());
    assert_eq!(parsed.snapshots.first().unwrap().iteration, 0);

    let out = rhd(&["eval", "--trace", path(&trace), "--data", path(&data), "--r", "0.05"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report: EvalReport = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(report.robust_error < 0.5);
}

#[test]
fn eval_without_radius_reports_the_clean_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.rhd");
    assert!(rhd(&["gen", "--d", "2", "--n", "500", "--noise", "random:0.2", "-o", path(&data)]).status.success());
    let out = rhd(&["eval", "--weights", "0.3,-1", "--data", path(&data), "--r", "0"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report: EvalReport = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report.clean_error, report.robust_error);
}

#[test]
fn eval_rejects_mismatched_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.rhd");
    fs::write(&data, FIXTURE).unwrap();
    let out = rhd(&["eval", "--weights", "1,0,0", "--data", path(&data), "--r", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn oracle_on_the_three_point_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("three.rhd");
    fs::write(&data, FIXTURE).unwrap();
    let out = rhd(&["oracle", "--method", "grid2d", "--resolution", "0.001", "--data", path(&data), "--r", "0"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let result: OracleResult = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(result.opt_estimate, 1.0 / 3.0);
}

#[test]
fn malformed_and_missing_files() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.rhd");
    fs::write(&bad, "rhd v1 n=2 d=1 p=none bound=none\n1 0.5\n").unwrap();
    let out = rhd(&["eval", "--weights", "1", "--data", path(&bad), "--r", "0"]);
    assert_eq!(out.status.code(), Some(2));
    let out = rhd(&["eval", "--weights", "1", "--data", path(&dir.path().join("absent.rhd")), "--r", "0"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sweep_writes_csv_and_flags_failed_cells() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.json");
    let csv = dir.path().join("out.csv");
    let mut cfg = rhd::sweep::ExperimentConfig {
        generator: GeneratorSpec::gaussian(2),
        train: TrainConfig {
            algorithm: Algorithm::Gd,
            loss: LossSpec::CrossEntropy,
            attack: AttackSpec::new(Exponent::TWO, 0.1).unwrap(),
            eta: 0.05,
            iterations: 50,
            w_init: WeightVector::zeros(2).unwrap(),
            eval_every: None,
            seed: 0,
        },
        radii: vec![0.1],
        noise_rates: vec![0.0],
        seeds: vec![1],
        n: 100,
        validation_n: 200,
        eval_n: 1000,
        oracle: None,
        output: None,
    };
    fs::write(&config, serde_json::to_string(&cfg).unwrap()).unwrap();
    let out = rhd(&["sweep", "--config", path(&config), "-o", path(&csv)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(!text.contains('\r'));

    // A hard-margin family that cannot reach its margin fails every cell.
    cfg.generator = GeneratorSpec::new(
        rhd_core::data::Family::HardMargin {
            base: rhd_core::data::BaseFamily::UniformLpBall { p: Exponent::TWO },
        },
        2,
    )
    .with_teacher(WeightVector::basis(2, 0).unwrap())
    .with_margin(1.5);
    fs::write(&config, serde_json::to_string(&cfg).unwrap()).unwrap();
    let out = rhd(&["sweep", "--config", path(&config), "-o", path(&csv)]);
    assert_eq!(out.status.code(), Some(3));
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().nth(1).unwrap().contains("gave up"), "{text}");
}
