//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Exits non-zero when a criterion fails, except for failures listed in
//! `KNOWN_FAILURES`, which are reported but tolerated (see README).

use rand::Rng;
use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use crackpath_core::analysis::{
    confidence_region, median_path, path_function, percentile_ranks, tortuosity, tortuosity_stats,
};
use crackpath_core::estimation::{
    factor_indices, fit, log_likelihood, stability_curve, synthesize_training_set, FitOptions,
    Which,
};
use crackpath_core::geometry::{
    discretize, Configuration, Microstructure, Point2, TipState, UnitVector,
};
use crackpath_core::io::DEFAULT_PARAMS_JSON;
use crackpath_core::model::{transition_probabilities, ModelParams};
use crackpath_core::morphology::{generate, MorphologyConfig};
use crackpath_core::oracle::segment_crosses_interior;
use crackpath_core::prediction::{default_start, ensemble, local_step};
use crackpath_core::rng::from_seed;
use crackpath_core::selftest::{frechet_suite, random_candidate_set, shadow_suite};
use crackpath_core::{CrackPath, Ensemble};

/// Criteria whose failure is documented as unattainable rather than a defect.
/// Only the listed sub-check may fail; every other check of the criterion still gates.
const KNOWN_FAILURES: &[&str] = &["5:stability"];

struct Outcome {
    passed: bool,
    detail: String,
    /// Name of the failing sub-check when the failure is an accepted one.
    tolerated: Option<&'static str>,
}

impl Outcome {
    fn new(passed: bool, detail: String) -> Self {
        Outcome {
            passed,
            detail,
            tolerated: None,
        }
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("thread pool")
        .install(f)
}

fn microstructure(seed: u64) -> Microstructure {
    generate(&MorphologyConfig {
        seed,
        ..MorphologyConfig::default()
    })
    .expect("default morphology generates")
}

fn c1_kernel_defaults() -> Outcome {
    let expected = "{\n  \"f1\": {\n    \"mu1\": 7.06,\n    \"mu2\": 4.1,\n    \"mu3\": 30.2,\n    \"mu4\": 8.9,\n    \"mu5\": 0.2,\n    \"mu6\": 0.85\n  },\n  \"f2\": {\n    \"lambda1\": 34.2,\n    \"lambda2\": 9.2,\n    \"lambda3\": 13.16,\n    \"lambda4\": 1.79,\n    \"lambda5\": 1.08,\n    \"lambda6\": 0.42\n  }\n}\n";
    let shipped = std::fs::read_to_string(
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/default_params.json"),
    )
    .expect("shipped parameter file");
    let d = ModelParams::default();
    let values_ok = d.f1.to_array() == [7.06, 4.1, 30.2, 8.9, 0.2, 0.85]
        && d.f2.to_array() == [34.2, 9.2, 13.16, 1.79, 1.08, 0.42];
    let passed = shipped == expected && DEFAULT_PARAMS_JSON == expected && values_ok;
    Outcome::new(
        passed,
        format!(
            "file byte-identical {}, in-code defaults equal {}",
            shipped == expected,
            values_ok
        ),
    )
}

fn c2_normalization() -> Outcome {
    let mut rng = from_seed(2);
    let ((worst, non_positive, sizes), t) = timed(|| {
        let mut worst = 0.0f64;
        let mut non_positive = 0;
        let mut sizes = 0usize;
        for i in 0..10_000 {
            let cs = random_candidate_set(&mut rng);
            let mut p = ModelParams::default();
            if i % 2 == 1 {
                for c in [Configuration::F1, Configuration::F2] {
                    let f = factor_indices(c);
                    let a: [f64; 6] = std::array::from_fn(|k| {
                        let hi: f64 = if f.contains(&k) { 50.0 } else { 5.0 };
                        rng.gen_range(0.1f64.ln()..hi.ln()).exp()
                    });
                    p.set(c, a);
                }
            }
            let probs = transition_probabilities(&cs, &p).expect("non-empty set");
            sizes += probs.len();
            worst = worst.max((probs.iter().sum::<f64>() - 1.0).abs());
            non_positive += probs.iter().filter(|&&q| q.is_nan() || q <= 0.0).count();
        }
        (worst, non_positive, sizes)
    });
    Outcome::new(
        worst <= 1e-12 && non_positive == 0 && t.as_secs_f64() < 5.0,
        format!(
            "10000 sets ({sizes} candidates), max |sum-1| {worst:.2e}, non-positive {non_positive}, {:.2}s",
            t.as_secs_f64()
        ),
    )
}

fn c3_shadow_oracle() -> Outcome {
    let (r, t) = timed(|| shadow_suite(1000, 3));
    Outcome::new(
        r.passed() && r.cases == 1000 && t.as_secs_f64() < 30.0,
        format!(
            "{} instances, {} mismatches, {:.2}s",
            r.cases,
            r.failures,
            t.as_secs_f64()
        ),
    )
}

fn c4_frechet_oracle() -> Outcome {
    let (r, t) = timed(|| frechet_suite(500, 4));
    Outcome::new(
        r.passed() && r.cases == 500 && t.as_secs_f64() < 60.0,
        format!(
            "{} pairs, {} mismatches beyond 1e-12, {:.2}s",
            r.cases,
            r.failures,
            t.as_secs_f64()
        ),
    )
}

fn c5_recovery() -> Outcome {
    let truth = ModelParams::default();
    let (res, t) = timed(|| {
        single_threaded(|| {
            let (ts, _) = synthesize_training_set(35, &MorphologyConfig::default(), &truth, 5, 5)
                .expect("training set");
            let opts = FitOptions::default();
            let generating = log_likelihood(&truth, &ts, Which::Both);
            let fitted = fit(&ts, &opts).expect("fit");
            let rows = stability_curve(&ts, &[25, 35], &opts).expect("stability");
            (ts, generating, fitted, rows)
        })
    });
    let (ts, generating, fitted, rows) = res;
    let ll_ok = fitted.log_likelihood >= generating - 1e-6;
    let mut drifts = Vec::new();
    for c in [Configuration::F1, Configuration::F2] {
        let (a, b) = (rows[0].params.get(c), rows[1].params.get(c));
        let names = match c {
            Configuration::F1 => ["mu1", "mu2", "mu3", "mu4", "mu5", "mu6"],
            Configuration::F2 => [
                "lambda1", "lambda2", "lambda3", "lambda4", "lambda5", "lambda6",
            ],
        };
        for i in factor_indices(c) {
            drifts.push((names[i], (b[i] - a[i]).abs() / b[i].abs()));
        }
    }
    let stable = drifts.iter().all(|d| d.1 < 0.10);
    let time_ok = t.as_secs_f64() < 600.0;
    let drift_text: Vec<String> = drifts
        .iter()
        .map(|(n, d)| format!("{n} {:.1}%", 100.0 * d))
        .collect();
    let detail = format!(
        "{} F1 + {} F2 records; fitted ll {:.4} vs generating {:.4}; factor drift 25->35: {}; {:.1}s single-threaded",
        ts.records_f1.len(),
        ts.records_f2.len(),
        fitted.log_likelihood,
        generating,
        drift_text.join(", "),
        t.as_secs_f64()
    );
    let mut o = Outcome::new(ll_ok && stable && time_ok, detail);
    if ll_ok && time_ok && !stable {
        o.tolerated = Some("5:stability");
    }
    o
}

fn simulated_ensemble(seed: u64, m: usize) -> (Microstructure, Ensemble) {
    let ms = microstructure(seed);
    let dm = discretize(&ms, 5).expect("discretization");
    let e = ensemble(
        &dm,
        "acceptance",
        default_start(&dm),
        UnitVector::PLUS_X,
        &ModelParams::default(),
        m,
        seed,
    )
    .expect("ensemble");
    (ms, e)
}

fn c6_hypotheses() -> Outcome {
    let ((crossings, backward, segments), t) = timed(|| {
        let (ms, e) = simulated_ensemble(6, 100);
        let mut crossings = 0;
        let mut backward = 0;
        let mut segments = 0;
        for p in &e.paths {
            for w in p.points.windows(2) {
                segments += 1;
                if ms
                    .aggregates
                    .iter()
                    .any(|a| segment_crosses_interior(w[0], w[1], a))
                {
                    crossings += 1;
                }
                if (w[1] - w[0]).dot(Point2::new(1.0, 0.0)) < 0.0 {
                    backward += 1;
                }
            }
        }
        (crossings, backward, segments)
    });
    Outcome::new(
        crossings == 0 && backward == 0 && t.as_secs_f64() < 120.0,
        format!(
            "{segments} segments in 100 paths: {crossings} cross an aggregate interior, {backward} violate the half-plane condition, {:.2}s",
            t.as_secs_f64()
        ),
    )
}

fn c7_tortuosity() -> Outcome {
    let (res, t) = timed(|| {
        let empty = Microstructure::empty(0.6, 0.225);
        let dm = discretize(&empty, 5).expect("discretization");
        let straight = ensemble(
            &dm,
            "empty",
            default_start(&dm),
            UnitVector::PLUS_X,
            &ModelParams::default(),
            10,
            1,
        )
        .expect("ensemble");
        let straight_ok = straight
            .paths
            .iter()
            .all(|p| tortuosity(p).expect("tortuosity") == 1.0);
        let mut below_one = 0;
        let mut median_outside = 0;
        let mut n_paths = 0;
        for seed in 0..5 {
            let (_, e) = simulated_ensemble(70 + seed, 100);
            let s = tortuosity_stats(&e, 20).expect("stats");
            n_paths += s.values.len();
            below_one += s.values.iter().filter(|&&v| v < 1.0).count();
            if !(s.interval.0 <= s.median && s.median <= s.interval.1) {
                median_outside += 1;
            }
        }
        (straight_ok, below_one, median_outside, n_paths)
    });
    let (straight_ok, below_one, median_outside, n_paths) = res;
    Outcome::new(
        straight_ok && below_one == 0 && median_outside == 0 && t.as_secs_f64() < 120.0,
        format!(
            "empty microstructure tau = 1: {straight_ok}; {below_one}/{n_paths} paths below 1; median outside interval in {median_outside}/5 ensembles; {:.2}s",
            t.as_secs_f64()
        ),
    )
}

fn c8_confidence_indices() -> Outcome {
    let ranks_ok = percentile_ranks(100) == (5, 95);
    let mut rng = from_seed(8);
    let paths: Vec<CrackPath> = (0..100)
        .map(|_| {
            let mut pts = vec![Point2::new(0.0, rng.gen_range(0.0..1.0))];
            for k in 1..=6 {
                pts.push(Point2::new(k as f64 / 6.0, rng.gen_range(0.0..1.0)));
            }
            CrackPath::from_points(pts)
        })
        .collect();
    let e = Ensemble {
        microstructure_id: "random".into(),
        master_seed: 0,
        paths,
    };
    let r = confidence_region(&e, 50, 1.0).expect("region");
    let funcs: Vec<_> = e
        .paths
        .iter()
        .map(|p| path_function(p).expect("path function"))
        .collect();
    let order_ok = r.grid.iter().enumerate().all(|(k, &x)| {
        let mut v: Vec<f64> = funcs.iter().map(|f| f.eval(x)).collect();
        v.sort_by(f64::total_cmp);
        r.lower[k] == v[4] && r.upper[k] == v[94]
    });
    let same = Ensemble {
        paths: vec![e.paths[0].clone(); 100],
        ..e.clone()
    };
    let degenerate = confidence_region(&same, 50, 1.0).expect("region");
    let zero_ok = degenerate.diameter == 0.0 && degenerate.lower == degenerate.upper;
    Outcome::new(
        ranks_ok && r.ranks == (5, 95) && order_ok && zero_ok,
        format!(
            "ranks {:?}; curves equal the 5th/95th order statistics: {order_ok}; identical paths diameter {}",
            r.ranks, degenerate.diameter
        ),
    )
}

fn c9_performance() -> Outcome {
    let ms = microstructure(9);
    let dm = discretize(&ms, 5).expect("discretization");
    let params = ModelParams::default();
    // Average cost of one local step, over every tip of a simulated crack.
    let e = ensemble(
        &dm,
        "perf",
        default_start(&dm),
        UnitVector::PLUS_X,
        &params,
        1,
        9,
    )
    .expect("ensemble");
    let path = &e.paths[0];
    let mut rng = from_seed(9);
    let mut visited = std::collections::HashSet::new();
    let (steps, t_steps) = timed(|| {
        let mut steps = 0;
        for p in &path.points[..path.points.len() - 1] {
            let tip = match dm.locate(*p, 0.0) {
                Some(i) => {
                    visited.insert(i);
                    TipState::at(&dm, i)
                }
                None => TipState::free(*p),
            };
            let _ = local_step(&tip, UnitVector::PLUS_X, &dm, &visited, &params, &mut rng);
            steps += 1;
        }
        steps
    });
    let per_step = t_steps.as_secs_f64() / steps as f64;
    let (_, t_pipeline) = timed(|| {
        single_threaded(|| {
            let ms = microstructure(10);
            let dm = discretize(&ms, 5).expect("discretization");
            let e = ensemble(
                &dm,
                "pipeline",
                default_start(&dm),
                UnitVector::PLUS_X,
                &params,
                100,
                10,
            )
            .expect("ensemble");
            let _ = median_path(&e).expect("median");
            let _ = confidence_region(&e, 200, ms.width).expect("region");
            let _ = tortuosity_stats(&e, 20).expect("tortuosity");
        })
    });
    let pipeline = t_pipeline.as_secs_f64();
    Outcome::new(
        per_step <= 0.13 && pipeline < 60.0,
        format!(
            "local step {:.3} ms (bound 130 ms) over {steps} steps; M = 100 pipeline {pipeline:.2}s single-threaded (target < 60 s, bound 1375 s)",
            per_step * 1e3
        ),
    )
}

fn crackpath(dir: &Path, threads: usize, args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_crackpath"))
        .args(args)
        .current_dir(dir)
        .env("CRACKPATH_THREADS", threads.to_string())
        .env_remove("CRACKPATH_DIR")
        .env_remove("CRACKPATH_SEED")
        .env_remove("CRACKPATH_PARAMS")
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

/// All files in `dir`; manifests lose their wall-time entry.
fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).expect("readable dir") {
        let path = entry.expect("entry").path();
        let name = path.file_name().unwrap().to_string_lossy().to_string();
        let bytes = std::fs::read(&path).expect("readable file");
        let bytes = if name.ends_with(".manifest.json") {
            let mut v: serde_json::Value = serde_json::from_slice(&bytes).expect("manifest json");
            v.as_object_mut().unwrap().remove("wall_time_seconds");
            serde_json::to_vec(&v).unwrap()
        } else {
            bytes
        };
        out.insert(name, bytes);
    }
    out
}

fn c10_determinism() -> Outcome {
    let commands: &[&[&str]] = &[
        &["generate", "--vf", "0.25", "--seed", "7"],
        &["discretize"],
        &["covariogram", "--seed", "3", "--samples", "5000"],
        &["predict", "--seed", "11"],
        &["analyze"],
        &["synthesize-training", "-n", "6", "--seed", "5"],
        &["fit", "--sizes", "3,6", "--starts", "3", "--seed", "2"],
        &[
            "selftest",
            "--shadow-cases",
            "50",
            "--frechet-cases",
            "50",
            "--normalization-cases",
            "200",
            "--recovery-microstructures",
            "2",
            "--out",
            "selftest.json",
        ],
    ];
    let mut snaps = Vec::new();
    let mut failures = Vec::new();
    for threads in [1usize, 4, 4] {
        let dir = tempfile::tempdir().expect("temp dir");
        for args in commands {
            if !crackpath(dir.path(), threads, args) {
                failures.push(format!(
                    "`{}` failed with {threads} threads",
                    args.join(" ")
                ));
            }
        }
        snaps.push(snapshot(dir.path()));
    }
    let files = snaps[0].len();
    let mut differing: Vec<String> = Vec::new();
    for s in &snaps[1..] {
        for (name, bytes) in &snaps[0] {
            if s.get(name) != Some(bytes) {
                differing.push(name.clone());
            }
        }
        if s.len() != files {
            differing.push("(file set)".into());
        }
    }
    differing.sort();
    differing.dedup();
    Outcome::new(
        failures.is_empty() && differing.is_empty() && files > 0,
        format!(
            "{} commands x 3 runs (1, 4, 4 threads): {files} files compared, differing {:?}, command failures {:?}",
            commands.len(),
            differing,
            failures
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("1", c1_kernel_defaults),
        ("2", c2_normalization),
        ("3", c3_shadow_oracle),
        ("4", c4_frechet_oracle),
        ("5", c5_recovery),
        ("6", c6_hypotheses),
        ("7", c7_tortuosity),
        ("8", c8_confidence_indices),
        ("9", c9_performance),
        ("10", c10_determinism),
    ];
    let names = [
        "kernel defaults",
        "probability normalization",
        "shadow filter vs visibility oracle",
        "Frechet DP vs enumeration",
        "parameter recovery and stability",
        "geometric hypotheses on simulated paths",
        "tortuosity properties",
        "confidence-region indices",
        "performance",
        "determinism",
    ];
    let mut unexpected = 0;
    for ((id, run), name) in criteria.iter().zip(names) {
        let o = run();
        let status = if o.passed { "PASS" } else { "FAIL" };
        let note = match o.tolerated {
            Some(k) if !o.passed && KNOWN_FAILURES.contains(&k) => " [known, documented]",
            _ => "",
        };
        println!("{status} criterion {id:>2} ({name}){note}: {}", o.detail);
        if !o.passed && note.is_empty() {
            unexpected += 1;
        }
    }
    if unexpected > 0 {
        eprintln!("{unexpected} criteria failed");
        std::process::exit(1);
    }
}
