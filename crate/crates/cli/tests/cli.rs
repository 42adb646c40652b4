//! End-to-end tests of the `ddcs` binary: the full pipeline on a synthetic
//! recording, exit codes and stderr shapes for the failure paths, config
//! file handling, and pinned help text.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ddcs_core::store::{load_bundle, load_measurements, load_windows};
use ddcs_core::synth::{synthesize_ecg, EcgSynthConfig};
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ddcs")).args(args).output().expect("spawn ddcs")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "expected success, got {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_sample_csv(path: &Path) {
    let rec = synthesize_ecg::<f64>(&EcgSynthConfig::default(), 4096).unwrap();
    let mut text = String::from("sample\n");
    for v in &rec.samples {
        text.push_str(&format!("{v:.6}\n"));
    }
    std::fs::write(path, text).unwrap();
}

/// Ingests the synthetic recording into 32-sample windows and returns the
/// windows path. Short windows keep the training tests fast.
fn ingest_windows(dir: &Path) -> PathBuf {
    let csv = dir.join("signal.csv");
    write_sample_csv(&csv);
    let out = dir.join("windows.ddcw");
    let o = run(&[
        "ingest",
        "--input",
        csv.to_str().unwrap(),
        "--window",
        "32",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_ok(&o);
    out
}

/// Small-corpus training flags shared by the tests that need a bundle.
const FAST_TRAIN: &[&str] = &[
    "--train-count",
    "60",
    "--test-count",
    "12",
    "--atoms",
    "64",
    "--epochs",
    "2",
    "--batch-size",
    "16",
    "--smt-iter",
    "120",
];

fn train_fast(windows: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args: Vec<&str> =
        vec!["train", "--windows", windows.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(FAST_TRAIN);
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn full_chain_produces_consistent_artifacts() {
    let dir = TempDir::new().unwrap();
    let windows_path = ingest_windows(dir.path());
    let windows = load_windows(&windows_path).unwrap();
    assert!(windows.len() >= 72, "only {} windows ingested", windows.len());
    assert!(windows.iter().all(|w| w.len() == 32));

    let bundle_path = dir.path().join("model.ddcs");
    let o = train_fast(&windows_path, &bundle_path, &["--cr", "4"]);
    assert_ok(&o);
    assert!(stdout(&o).contains("trained bundle n=32 m=8 k=64"));
    let bundle = load_bundle(&bundle_path).unwrap();
    assert_eq!((bundle.n(), bundle.m(), bundle.k()), (32, 8, 64));
    assert_eq!(bundle.seed, 42);

    let meas_path = dir.path().join("meas.ddcm");
    let o = run(&[
        "compress",
        "--bundle",
        bundle_path.to_str().unwrap(),
        "--windows",
        windows_path.to_str().unwrap(),
        "--out",
        meas_path.to_str().unwrap(),
    ]);
    assert_ok(&o);
    let measurements = load_measurements(&meas_path).unwrap();
    assert_eq!(measurements.len(), windows.len());
    assert!(measurements.iter().all(|y| y.len() == 8));

    let recon_path = dir.path().join("recon.ddcw");
    let o = run(&[
        "reconstruct",
        "--bundle",
        bundle_path.to_str().unwrap(),
        "--measurements",
        meas_path.to_str().unwrap(),
        "--out",
        recon_path.to_str().unwrap(),
    ]);
    assert_ok(&o);
    let recon = load_windows(&recon_path).unwrap();
    assert_eq!(recon.len(), windows.len());
    assert!(recon.iter().all(|w| w.len() == 32));

    let report_path = dir.path().join("eval.csv");
    let o = run(&[
        "evaluate",
        "--bundle",
        bundle_path.to_str().unwrap(),
        "--windows",
        windows_path.to_str().unwrap(),
        "--skip",
        "60",
        "--count",
        "12",
        "--report",
        report_path.to_str().unwrap(),
    ]);
    assert_ok(&o);
    let report = std::fs::read_to_string(&report_path).unwrap();
    let mut lines = report.lines();
    assert_eq!(lines.next().unwrap(), "windows,empirical_delta,mean_rsnr_db,median_rsnr_db");
    let row = lines.next().unwrap();
    assert!(row.starts_with("12,"), "row: {row}");
    for field in row.split(',') {
        assert!(field.parse::<f64>().unwrap().is_finite());
    }
}

#[test]
fn training_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let windows_path = ingest_windows(dir.path());
    let first = dir.path().join("a.ddcs");
    let second = dir.path().join("b.ddcs");
    assert_ok(&train_fast(&windows_path, &first, &[]));
    assert_ok(&train_fast(&windows_path, &second, &[]));
    let a = std::fs::read(&first).unwrap();
    let b = std::fs::read(&second).unwrap();
    assert_eq!(a, b, "same inputs and seed must give byte-identical bundles");
}

#[test]
fn missing_input_fails_without_leaving_output() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("model.ddcs");
    let o = run(&[
        "train",
        "--windows",
        dir.path().join("absent.ddcw").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("error: train: cannot open"), "stderr: {}", stderr(&o));
    // No output and no stray temporaries.
    let leftovers: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
    assert!(leftovers.is_empty(), "unexpected files: {leftovers:?}");
}

#[test]
fn unknown_flags_use_the_usage_exit_code() {
    let o = run(&["train", "--bogus-flag"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"), "stderr: {}", stderr(&o));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = TempDir::new().unwrap();
    let windows_path = ingest_windows(dir.path());
    let config = dir.path().join("run.conf");
    std::fs::write(&config, "cr = 4\nmystery = 1\n").unwrap();
    let out = dir.path().join("model.ddcs");
    let o = train_fast(&windows_path, &out, &["--config", config.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unknown config key mystery"), "stderr: {}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn flags_override_config_entries() {
    let dir = TempDir::new().unwrap();
    let windows_path = ingest_windows(dir.path());
    // Hyphenated keys are accepted; comments and blank lines are skipped.
    let config = dir.path().join("run.conf");
    std::fs::write(&config, "# compression\ncr = 8\n\nsmt-iter = 120\n").unwrap();

    let from_config = dir.path().join("config.ddcs");
    let o = run(&[
        "train",
        "--windows",
        windows_path.to_str().unwrap(),
        "--out",
        from_config.to_str().unwrap(),
        "--train-count",
        "60",
        "--test-count",
        "12",
        "--atoms",
        "64",
        "--epochs",
        "2",
        "--batch-size",
        "16",
        "--config",
        config.to_str().unwrap(),
    ]);
    assert_ok(&o);
    assert_eq!(load_bundle(&from_config).unwrap().m(), 4, "cr 8 on n=32 gives m=4");

    let from_flag = dir.path().join("flag.ddcs");
    let mut args: Vec<&str> = vec![
        "train",
        "--windows",
        windows_path.to_str().unwrap(),
        "--out",
        from_flag.to_str().unwrap(),
    ];
    args.extend_from_slice(FAST_TRAIN);
    args.extend_from_slice(&["--cr", "4", "--config", config.to_str().unwrap()]);
    let o = run(&args);
    assert_ok(&o);
    assert_eq!(load_bundle(&from_flag).unwrap().m(), 8, "the flag must win over the config");
}

#[test]
fn evaluate_rejects_out_of_range_slices() {
    let dir = TempDir::new().unwrap();
    let windows_path = ingest_windows(dir.path());
    let bundle_path = dir.path().join("model.ddcs");
    assert_ok(&train_fast(&windows_path, &bundle_path, &[]));
    let report = dir.path().join("eval.csv");
    let o = run(&[
        "evaluate",
        "--bundle",
        bundle_path.to_str().unwrap(),
        "--windows",
        windows_path.to_str().unwrap(),
        "--skip",
        "10000",
        "--report",
        report.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("leaves no windows"), "stderr: {}", stderr(&o));
    assert!(!report.exists());
}

#[test]
fn sweep_honors_method_and_ratio_lists() {
    let dir = TempDir::new().unwrap();
    let windows_path = ingest_windows(dir.path());
    let report_path = dir.path().join("sweep.csv");
    let o = run(&[
        "sweep",
        "--windows",
        windows_path.to_str().unwrap(),
        "--train-count",
        "60",
        "--test-count",
        "12",
        "--atoms",
        "64",
        "--epochs",
        "2",
        "--batch-size",
        "16",
        "--cr-list",
        "4,8",
        "--methods",
        "gaussian_odl",
        "--measure-time",
        "false",
        "--report",
        report_path.to_str().unwrap(),
    ]);
    assert_ok(&o);
    let report = std::fs::read_to_string(&report_path).unwrap();
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(lines[0], "method,cr,m,empirical_delta,mean_rsnr_db,median_rsnr_db,wall_time_s,seed");
    let rows: Vec<&&str> = lines[1..].iter().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 2, "report: {report}");
    assert!(rows[0].starts_with("gaussian_odl,4,8,"), "row: {}", rows[0]);
    assert!(rows[1].starts_with("gaussian_odl,8,4,"), "row: {}", rows[1]);
}

#[test]
fn help_text_is_pinned() {
    let cases: &[(&[&str], &str)] = &[
        (&["--help"], "help.txt"),
        (&["ingest", "--help"], "help-ingest.txt"),
        (&["train", "--help"], "help-train.txt"),
        (&["compress", "--help"], "help-compress.txt"),
        (&["reconstruct", "--help"], "help-reconstruct.txt"),
        (&["evaluate", "--help"], "help-evaluate.txt"),
        (&["sweep", "--help"], "help-sweep.txt"),
    ];
    let golden_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    for (args, file) in cases {
        let o = run(args);
        assert_ok(&o);
        let expected = std::fs::read_to_string(golden_dir.join(file))
            .unwrap_or_else(|e| panic!("missing golden file {file}: {e}"));
        assert_eq!(stdout(&o), expected, "help text drifted for {args:?}");
    }
}
