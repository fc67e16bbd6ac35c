use std::path::Path;
use std::process::{Command, Output};

use crackpath_core::io::{self, EnsembleFile, StatisticsFile};
use crackpath_core::morphology::volume_fraction;
use crackpath_core::Microstructure;

fn crackpath(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crackpath"))
        .args(args)
        .current_dir(dir)
        .env_remove("CRACKPATH_DIR")
        .env_remove("CRACKPATH_SEED")
        .env_remove("CRACKPATH_PARAMS")
        .env_remove("CRACKPATH_THREADS")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) {
    let o = crackpath(dir, args);
    assert!(
        o.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&o.stderr)
    );
}

fn error_category(o: &Output) -> String {
    let stderr = String::from_utf8_lossy(&o.stderr);
    let last = stderr.lines().last().unwrap_or_default();
    let v: serde_json::Value = serde_json::from_str(last).expect("JSON error on stderr");
    v["error"].as_str().unwrap().to_string()
}

#[test]
fn generate_fraction_and_empty() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &[
            "generate", "--vf", "0.25", "--shape", "square", "--seed", "7",
        ],
    );
    let m = io::read_microstructure(&dir.path().join("microstructure.json")).unwrap();
    assert!((0.24..=0.26).contains(&volume_fraction(&m)));
    assert!(dir
        .path()
        .join("microstructure.json.manifest.json")
        .exists());
    ok(
        dir.path(),
        &["generate", "--vf", "0", "--out", "empty.json"],
    );
    let e: Microstructure = io::read_json(&dir.path().join("empty.json")).unwrap();
    assert!(e.aggregates.is_empty());
    let bad = crackpath(dir.path(), &["generate", "--vf", "0.7"]);
    assert_eq!(bad.status.code(), Some(3));
    assert_eq!(error_category(&bad), "invalid-argument");
}

#[test]
fn straight_crack_on_empty_microstructure() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["generate", "--vf", "0"]);
    ok(dir.path(), &["predict", "-m", "5", "--bandwidth", "0.01"]);
    let e = EnsembleFile::read(&dir.path().join("ensemble.json")).unwrap();
    assert_eq!(e.paths.len(), 5);
    for p in &e.paths {
        assert_eq!(p.points.len(), 2);
        assert_eq!(p.points[1].x, 0.6);
    }
    let s: StatisticsFile = io::read_json(&dir.path().join("statistics.json")).unwrap();
    assert!(s.tortuosity.values.iter().all(|&t| t == 1.0));
    assert_eq!(s.region.unwrap().diameter, 0.0);
    assert!(dir.path().join("overlay.svg").exists());
}

#[test]
fn default_ensemble_size_is_100() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["generate", "--seed", "3"]);
    ok(dir.path(), &["predict", "--seed", "4", "--no-svg"]);
    let e = EnsembleFile::read(&dir.path().join("ensemble.json")).unwrap();
    assert_eq!(e.paths.len(), 100);
    let s: StatisticsFile = io::read_json(&dir.path().join("statistics.json")).unwrap();
    assert_eq!(s.region.unwrap().ranks, (5, 95));
}

#[test]
fn training_fit_and_stability_table() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &["synthesize-training", "-n", "4", "--seed", "9"],
    );
    ok(dir.path(), &["fit", "--starts", "2", "--sizes", "2,4"]);
    let csv = std::fs::read_to_string(dir.path().join("stability.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("size,log_likelihood,mu1"));
    io::read_params(&dir.path().join("params.json")).unwrap();
    let too_big = crackpath(dir.path(), &["fit", "--sizes", "5"]);
    assert_eq!(error_category(&too_big), "invalid-argument");
}

#[test]
fn bad_inputs_report_categories() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad_params.json"), "{\"f1\": {}}").unwrap();
    let o = crackpath(
        dir.path(),
        &[
            "synthesize-training",
            "-n",
            "1",
            "--params",
            "bad_params.json",
        ],
    );
    assert_eq!(error_category(&o), "format");
    assert_eq!(o.status.code(), Some(12));
    std::fs::write(
        dir.path().join("empty.json"),
        "{\"provenance\": [], \"records_f1\": [], \"records_f2\": []}",
    )
    .unwrap();
    let o = crackpath(dir.path(), &["fit", "--training", "empty.json"]);
    assert_eq!(error_category(&o), "empty-input");
    let o = crackpath(dir.path(), &["predict", "--microstructure", "missing.json"]);
    assert_eq!(error_category(&o), "io");
}

#[test]
fn covariogram_lag_zero_is_fraction() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["generate", "--seed", "5"]);
    ok(
        dir.path(),
        &["covariogram", "--lags", "0,0.01", "--samples", "40000"],
    );
    let m = io::read_microstructure(&dir.path().join("microstructure.json")).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("covariogram.csv")).unwrap();
    let row: Vec<f64> = csv
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert!((row[1] - volume_fraction(&m)).abs() <= 3.0 * row[2]);
}

#[test]
fn selftest_passes_and_catches_kernel_fault() {
    let dir = tempfile::tempdir().unwrap();
    let small = [
        "--shadow-cases",
        "100",
        "--frechet-cases",
        "50",
        "--normalization-cases",
        "200",
        "--recovery-microstructures",
        "2",
    ];
    let mut args = vec!["selftest"];
    args.extend(small);
    ok(dir.path(), &args);
    args.extend(["--inject-fault", "kernel-sign"]);
    let o = crackpath(dir.path(), &args);
    assert_eq!(o.status.code(), Some(13));
    assert_eq!(error_category(&o), "selftest-failed");
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL probability_normalization"));
}
