//! Oracle suites run by `crackpath selftest` and by the acceptance tests.
//!
//! Each suite compares a production routine with a slow reference from
//! [`crate::oracle`] on randomized inputs and counts disagreements.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashSet};
use std::f64::consts::PI;

use crate::analysis::discrete_frechet;
use crate::error::Result;
use crate::estimation::{fit, log_likelihood, synthesize_training_set, FitOptions, Which};
use crate::geometry::{
    build_candidate_set, discretize, field_of_view, polygon_distance, shadow_filter, Aggregate,
    CandidateSet, Configuration, DiscretizedMicrostructure, Microstructure, Point2, TipState,
    UnitVector,
};
use crate::model::{log_weight, softmax, ModelParams};
use crate::morphology::MorphologyConfig;
use crate::oracle::{frechet_by_enumeration, kernel_weight_reference, visible};
use crate::rng::{stream, Purpose};

/// Log-weight function under test; the production one is [`log_weight`].
pub type LogKernel = fn(Configuration, f64, f64, bool, &[f64; 6]) -> f64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub cases: usize,
    pub failures: usize,
    /// First disagreement found, if any.
    pub example: Option<String>,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.cases > 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelftestReport {
    pub seed: u64,
    pub suites: Vec<SuiteResult>,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct SelftestOptions {
    pub seed: u64,
    pub shadow_cases: usize,
    pub frechet_cases: usize,
    pub normalization_cases: usize,
    pub recovery_microstructures: usize,
    pub kernel: LogKernel,
}

impl Default for SelftestOptions {
    fn default() -> Self {
        SelftestOptions {
            seed: 0,
            shadow_cases: 1000,
            frechet_cases: 500,
            normalization_cases: 10_000,
            recovery_microstructures: 5,
            kernel: log_weight,
        }
    }
}

struct Tally {
    name: &'static str,
    cases: usize,
    failures: usize,
    example: Option<String>,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Tally {
            name,
            cases: 0,
            failures: 0,
            example: None,
        }
    }

    fn check(&mut self, ok: bool, describe: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok {
            self.failures += 1;
            if self.example.is_none() {
                self.example = Some(describe());
            }
        }
    }

    fn finish(self) -> SuiteResult {
        SuiteResult {
            name: self.name.into(),
            cases: self.cases,
            failures: self.failures,
            example: self.example,
        }
    }
}

/// Convex polygon inscribed in a circle at sorted random angles.
fn random_polygon(
    rng: &mut ChaCha8Rng,
    id: usize,
    center: Point2,
    radius: f64,
) -> Option<Aggregate> {
    let n = rng.gen_range(3..=8);
    let mut angles: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
    angles.sort_by(f64::total_cmp);
    let min_gap = angles
        .windows(2)
        .map(|w| w[1] - w[0])
        .chain([angles[0] + 2.0 * PI - angles[n - 1]])
        .fold(f64::INFINITY, f64::min);
    if min_gap < 0.15 {
        return None;
    }
    let vertices = angles
        .iter()
        .map(|a| center + Point2::new(a.cos(), a.sin()) * radius)
        .collect();
    Aggregate::new(id, vertices).ok()
}

/// Random unit-square microstructure with up to six disjoint convex aggregates.
pub fn random_microstructure(rng: &mut ChaCha8Rng) -> Microstructure {
    let target = rng.gen_range(1..=6);
    let mut aggregates: Vec<Aggregate> = Vec::new();
    for _ in 0..200 {
        if aggregates.len() == target {
            break;
        }
        let center = Point2::new(rng.gen_range(0.15..0.85), rng.gen_range(0.15..0.85));
        let radius = rng.gen_range(0.03..0.14);
        let Some(a) = random_polygon(rng, aggregates.len(), center, radius) else {
            continue;
        };
        if aggregates.iter().all(|b| polygon_distance(&a, b) > 0.005) {
            aggregates.push(a);
        }
    }
    Microstructure::new(1.0, 1.0, aggregates).expect("generated aggregates are valid")
}

/// A random tip: either a free matrix point or a discretization point (then marked visited).
pub fn random_tip(
    rng: &mut ChaCha8Rng,
    dm: &DiscretizedMicrostructure,
) -> (TipState, HashSet<usize>) {
    if !dm.is_empty() && rng.gen_bool(0.5) {
        let i = rng.gen_range(0..dm.len());
        return (TipState::at(dm, i), HashSet::from([i]));
    }
    loop {
        let p = Point2::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
        if dm.source.aggregate_strictly_containing(p).is_none() {
            return (TipState::free(p), HashSet::new());
        }
    }
}

fn random_direction(rng: &mut ChaCha8Rng) -> UnitVector {
    if rng.gen_bool(0.5) {
        return UnitVector::PLUS_X;
    }
    let a = rng.gen_range(0.0..2.0 * PI);
    UnitVector::new(Point2::new(a.cos(), a.sin())).expect("unit circle point")
}

/// Shadow filtering against brute-force segment/interior visibility: the kept
/// index sets must be identical.
pub fn shadow_suite(cases: usize, seed: u64) -> SuiteResult {
    let mut rng = stream(seed, Purpose::Selftest, 1);
    let mut t = Tally::new("shadow_vs_visibility");
    for case in 0..cases {
        let m = random_microstructure(&mut rng);
        let dm = discretize(&m, rng.gen_range(2..=6)).expect("valid microstructure");
        let (tip, visited) = random_tip(&mut rng, &dm);
        let dir = random_direction(&mut rng);
        let fov = field_of_view(tip.position, dir, &dm, &visited);
        let kept: BTreeSet<usize> = shadow_filter(tip.position, &fov, &dm)
            .iter()
            .map(|p| p.index)
            .collect();
        let expected: BTreeSet<usize> = fov
            .iter()
            .filter(|p| visible(tip.position, p.position, &m.aggregates))
            .map(|p| p.index)
            .collect();
        t.check(kept == expected, || {
            let extra: Vec<_> = kept.difference(&expected).collect();
            let missing: Vec<_> = expected.difference(&kept).collect();
            format!(
                "case {case}: tip {:?}, kept but hidden {extra:?}, visible but deleted {missing:?}",
                tip.position
            )
        });
    }
    t.finish()
}

/// Dynamic-programming Fréchet distance against coupling enumeration on paths of at most 8 vertices.
pub fn frechet_suite(cases: usize, seed: u64) -> SuiteResult {
    let mut rng = stream(seed, Purpose::Selftest, 2);
    let mut t = Tally::new("frechet_vs_enumeration");
    let path = |rng: &mut ChaCha8Rng| -> Vec<Point2> {
        let n = rng.gen_range(1..=8);
        (0..n)
            .map(|_| Point2::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)))
            .collect()
    };
    for case in 0..cases {
        let a = path(&mut rng);
        let b = path(&mut rng);
        let dp = discrete_frechet(&a, &b).expect("non-empty paths");
        let brute = frechet_by_enumeration(&a, &b);
        t.check((dp - brute).abs() <= 1e-12, || {
            format!("case {case}: dp {dp} vs enumeration {brute}")
        });
    }
    t.finish()
}

fn random_params(rng: &mut ChaCha8Rng) -> ModelParams {
    let mut p = ModelParams::default();
    if rng.gen_bool(0.5) {
        return p;
    }
    for c in [Configuration::F1, Configuration::F2] {
        let factors = crate::estimation::factor_indices(c);
        let mut a = [0.0; 6];
        for (i, v) in a.iter_mut().enumerate() {
            let hi: f64 = if factors.contains(&i) { 50.0 } else { 5.0 };
            *v = rng.gen_range(0.1f64.ln()..hi.ln()).exp();
        }
        p.set(c, a);
    }
    p
}

/// Random candidate set from a random geometric instance.
pub fn random_candidate_set(rng: &mut ChaCha8Rng) -> CandidateSet {
    loop {
        let m = random_microstructure(rng);
        let dm = discretize(&m, rng.gen_range(2..=6)).expect("valid microstructure");
        let (tip, visited) = random_tip(rng, &dm);
        if let Some(cs) = build_candidate_set(&tip, random_direction(rng), &dm, &visited) {
            return cs;
        }
    }
}

/// Transition probabilities from `kernel`: they must sum to one, be positive,
/// and match the linear-space reference kernel.
pub fn normalization_suite(cases: usize, seed: u64, kernel: LogKernel) -> SuiteResult {
    let mut rng = stream(seed, Purpose::Selftest, 3);
    let mut t = Tally::new("probability_normalization");
    for case in 0..cases {
        let cs = random_candidate_set(&mut rng);
        let params = random_params(&mut rng);
        let p = params.get(cs.configuration);
        let f1 = cs.configuration == Configuration::F1;
        let logs: Vec<f64> = cs
            .candidates
            .iter()
            .map(|c| {
                kernel(
                    cs.configuration,
                    c.d_norm,
                    c.theta_norm,
                    c.same_aggregate,
                    &p,
                )
            })
            .collect();
        let probs = softmax(&logs);
        let w: Vec<f64> = cs
            .candidates
            .iter()
            .map(|c| kernel_weight_reference(f1, c.d_norm, c.theta_norm, c.same_aggregate, &p))
            .collect();
        let total: f64 = w.iter().sum();
        let sum: f64 = probs.iter().sum();
        let positive = probs.iter().all(|&q| q > 0.0);
        let worst = probs
            .iter()
            .zip(&w)
            .map(|(q, wi)| (q - wi / total).abs() / (1e-300 + wi / total))
            .fold(0.0, f64::max);
        t.check((sum - 1.0).abs() <= 1e-12 && positive && worst <= 1e-9, || {
            format!(
                "case {case}: {} candidates, sum {sum}, all positive {positive}, max relative error {worst:e}",
                probs.len()
            )
        });
    }
    t.finish()
}

/// Small parameter-recovery run: refit on cracks simulated with the defaults.
pub fn recovery_suite(microstructures: usize, seed: u64) -> Result<SuiteResult> {
    let mut t = Tally::new("parameter_recovery_smoke");
    let truth = ModelParams::default();
    let (ts, _) = synthesize_training_set(
        microstructures,
        &MorphologyConfig::default(),
        &truth,
        5,
        seed,
    )?;
    let opts = FitOptions {
        n_starts: 3,
        seed,
        ..FitOptions::default()
    };
    let generating = log_likelihood(&truth, &ts, Which::Both);
    let fitted = fit(&ts, &opts)?;
    t.check(fitted.log_likelihood >= generating - 1e-6, || {
        format!(
            "fitted {} below generating {}",
            fitted.log_likelihood, generating
        )
    });
    Ok(t.finish())
}

pub fn run(opts: &SelftestOptions) -> Result<SelftestReport> {
    let suites = vec![
        shadow_suite(opts.shadow_cases, opts.seed),
        frechet_suite(opts.frechet_cases, opts.seed),
        normalization_suite(opts.normalization_cases, opts.seed, opts.kernel),
        recovery_suite(opts.recovery_microstructures, opts.seed)?,
    ];
    Ok(SelftestReport {
        seed: opts.seed,
        passed: suites.iter().all(SuiteResult::passed),
        suites,
    })
}

/// Production kernel with the sign of the exponent flipped.
pub fn sign_flipped_kernel(c: Configuration, d: f64, t: f64, same: bool, p: &[f64; 6]) -> f64 {
    -log_weight(c, d, t, same, p)
}
