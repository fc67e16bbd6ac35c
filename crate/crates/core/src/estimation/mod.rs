//! Maximum-likelihood estimation of the kernel parameters from observed cracks.
//!
//! Each crack is replayed through the geometry to rebuild, at every tip, the
//! candidate set the chain saw and which candidate it took. The F1 and F2
//! parameter blocks are fitted independently by maximizing the summed log
//! transition probability of the chosen candidates, in log-parameter space.

pub mod optim;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::geometry::{
    build_candidate_set, discretize, Configuration, DiscretizedMicrostructure, Point2, TipState,
    UnitVector,
};
use crate::model::{log_weight, ModelParams};
use crate::morphology::{generate, MorphologyConfig};
use crate::prediction::{path_seed, project_to_boundary, simulate_crack, CrackPath};
use crate::rng::{derive_seed, stream, Purpose};
use optim::{minimize, BfgsOptions};

/// Normalized indicators of one candidate: `(d̃, θ̃, same_aggregate)`.
pub type Features = (f64, f64, bool);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub configuration: Configuration,
    pub candidates: Vec<Features>,
    pub chosen_index: usize,
    /// Index into `TrainingSet::provenance` of the microstructure the step comes from.
    pub microstructure: usize,
}

impl StepRecord {
    pub fn validate(&self) -> Result<()> {
        if self.candidates.is_empty() {
            return Err(Error::Empty("step record without candidates".into()));
        }
        if self.chosen_index >= self.candidates.len() {
            return Err(Error::InvalidArgument(format!(
                "chosen index {} out of {} candidates",
                self.chosen_index,
                self.candidates.len()
            )));
        }
        let has_same = self.candidates.iter().any(|c| c.2);
        if has_same != (self.configuration == Configuration::F1) {
            return Err(Error::InvalidArgument(format!(
                "configuration {:?} inconsistent with same-aggregate flags",
                self.configuration
            )));
        }
        if self
            .candidates
            .iter()
            .any(|&(d, t, _)| !(0.0..=1.0).contains(&d) || !(0.0..=1.0).contains(&t))
        {
            return Err(Error::InvalidArgument(
                "normalized indicator outside [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingSet {
    pub provenance: Vec<String>,
    pub records_f1: Vec<StepRecord>,
    pub records_f2: Vec<StepRecord>,
}

impl TrainingSet {
    pub fn records(&self, c: Configuration) -> &[StepRecord] {
        match c {
            Configuration::F1 => &self.records_f1,
            Configuration::F2 => &self.records_f2,
        }
    }

    /// Appends records, routing each by configuration.
    pub fn extend(&mut self, records: impl IntoIterator<Item = StepRecord>) {
        for r in records {
            match r.configuration {
                Configuration::F1 => self.records_f1.push(r),
                Configuration::F2 => self.records_f2.push(r),
            }
        }
    }

    /// Records coming from the first `n` microstructures.
    pub fn prefix(&self, n: usize) -> TrainingSet {
        let keep = |v: &[StepRecord]| v.iter().filter(|r| r.microstructure < n).cloned().collect();
        TrainingSet {
            provenance: self.provenance.iter().take(n).cloned().collect(),
            records_f1: keep(&self.records_f1),
            records_f2: keep(&self.records_f2),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (c, recs) in [
            (Configuration::F1, &self.records_f1),
            (Configuration::F2, &self.records_f2),
        ] {
            for r in recs {
                if r.configuration != c {
                    return Err(Error::InvalidArgument(format!(
                        "{:?} record filed under {c:?}",
                        r.configuration
                    )));
                }
                if r.microstructure >= self.provenance.len().max(1) && !self.provenance.is_empty() {
                    return Err(Error::InvalidArgument(format!(
                        "record refers to microstructure {} of {}",
                        r.microstructure,
                        self.provenance.len()
                    )));
                }
                r.validate()?;
            }
        }
        Ok(())
    }
}

/// Replays `path` and records, at each tip, the candidate indicators and the
/// candidate actually taken. A final point reached by straight projection
/// after the candidate set emptied is accepted without a record.
pub fn extract_steps(
    dm: &DiscretizedMicrostructure,
    path: &[Point2],
    direction: UnitVector,
    microstructure: usize,
) -> Result<Vec<StepRecord>> {
    let m = &dm.source;
    let Some(&start) = path.first() else {
        return Err(Error::Empty("path has no points".into()));
    };
    let inconsistent = |step: usize, reason: String| Error::InconsistentPath { step, reason };
    if m.aggregate_strictly_containing(start).is_some() {
        return Err(inconsistent(0, "start point inside an aggregate".into()));
    }
    let mut tip = match dm.locate(start, 0.0) {
        Some(i) => TipState::at(dm, i),
        None => TipState::free(start),
    };
    let mut visited: HashSet<usize> = tip.point.into_iter().collect();
    let mut records = Vec::new();
    for (step, &target) in path.iter().enumerate().skip(1) {
        let cs = build_candidate_set(&tip, direction, dm, &visited);
        let last = step + 1 == path.len();
        let Some(cs) = cs else {
            let end = project_to_boundary(tip.position, direction, m.width, m.height);
            if last && end.distance(target) <= 1e-9 {
                break;
            }
            return Err(inconsistent(
                step,
                "no reachable candidate at this tip".into(),
            ));
        };
        if let Some(a) = m.aggregate_strictly_containing(target) {
            return Err(inconsistent(
                step,
                format!("point inside aggregate {}", m.aggregates[a].id),
            ));
        }
        let Some(idx) = dm.locate(target, 1e-9) else {
            return Err(inconsistent(
                step,
                format!("({}, {}) is not a discretization point", target.x, target.y),
            ));
        };
        let Some(chosen_index) = cs.position_of(idx) else {
            return Err(inconsistent(
                step,
                format!("point {idx} is not a reachable candidate"),
            ));
        };
        records.push(StepRecord {
            configuration: cs.configuration,
            candidates: cs
                .candidates
                .iter()
                .map(|c| (c.d_norm, c.theta_norm, c.same_aggregate))
                .collect(),
            chosen_index,
            microstructure,
        });
        visited.insert(idx);
        tip = TipState::at(dm, idx);
    }
    Ok(records)
}

/// Neumaier-compensated sum, evaluated in input order.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        comp += if sum.abs() >= v.abs() {
            (sum - t) + v
        } else {
            (v - t) + sum
        };
        sum = t;
    }
    sum + comp
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Which records a likelihood covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Which {
    F1,
    F2,
    Both,
}

impl Which {
    pub fn configurations(self) -> &'static [Configuration] {
        match self {
            Which::F1 => &[Configuration::F1],
            Which::F2 => &[Configuration::F2],
            Which::Both => &[Configuration::F1, Configuration::F2],
        }
    }
}

fn record_log_likelihood(r: &StepRecord, p: &[f64; 6]) -> f64 {
    let logs: Vec<f64> = r
        .candidates
        .iter()
        .map(|&(d, t, s)| log_weight(r.configuration, d, t, s, p))
        .collect();
    logs[r.chosen_index] - log_sum_exp(&logs)
}

/// Sum over the selected records of the log-probability of the chosen candidate.
pub fn log_likelihood(params: &ModelParams, ts: &TrainingSet, which: Which) -> f64 {
    let parts: Vec<f64> = which
        .configurations()
        .iter()
        .flat_map(|&c| {
            let p = params.get(c);
            let v: Vec<f64> = ts
                .records(c)
                .par_iter()
                .map(|r| record_log_likelihood(r, &p))
                .collect();
            v
        })
        .collect();
    compensated_sum(parts)
}

/// Candidate features with logs precomputed for the optimizer.
struct Prepared {
    configuration: Configuration,
    records: Vec<(usize, Vec<[f64; 4]>)>,
}

impl Prepared {
    fn new(configuration: Configuration, records: &[StepRecord]) -> Self {
        let ln = |x: f64| if x > 0.0 { x.ln() } else { f64::NEG_INFINITY };
        Prepared {
            configuration,
            records: records
                .iter()
                .map(|r| {
                    let c = r
                        .candidates
                        .iter()
                        .map(|&(d, t, s)| [ln(d), ln(t), ln(d * t), if s { 1.0 } else { 0.0 }])
                        .collect();
                    (r.chosen_index, c)
                })
                .collect(),
        }
    }

    /// Log-weight of a candidate and its gradient with respect to the log-parameters `z`.
    fn weight_grad(&self, c: &[f64; 4], p: &[f64; 6]) -> (f64, [f64; 6]) {
        // factor · x^e and its derivatives in (ln factor, ln e).
        let term = |factor: f64, ln_x: f64, e: f64| -> (f64, f64) {
            if ln_x == f64::NEG_INFINITY {
                (0.0, 0.0)
            } else {
                let v = factor * (e * ln_x).exp();
                (v, v * ln_x * e)
            }
        };
        let [ln_d, ln_t, ln_dt, same] = *c;
        let mut g = [0.0; 6];
        let s = match self.configuration {
            Configuration::F1 if same > 0.0 => {
                let (a, ae) = term(p[0], ln_t, p[1]);
                g[0] = -a;
                g[1] = -ae;
                -a
            }
            Configuration::F1 => {
                let (a, ae) = term(p[2], ln_dt, p[5]);
                let (b, be) = term(p[3], ln_d, p[4]);
                g[2] = -a;
                g[5] = -ae;
                g[3] = -b;
                g[4] = -be;
                -a - b
            }
            Configuration::F2 => {
                let (a, ae) = term(p[0], ln_dt, p[4]);
                let (b, be) = term(p[1], ln_d, p[5]);
                let (c, ce) = term(p[2], ln_t, p[3]);
                g[0] = -a;
                g[4] = -ae;
                g[1] = -b;
                g[5] = -be;
                g[2] = -c;
                g[3] = -ce;
                -a - b - c
            }
        };
        (s, g)
    }

    /// Log-likelihood and its gradient in log-parameter space.
    fn evaluate(&self, z: &[f64]) -> (f64, [f64; 6]) {
        let mut p = [0.0; 6];
        for (pi, zi) in p.iter_mut().zip(z) {
            *pi = zi.exp();
        }
        let per: Vec<(f64, [f64; 6])> = self
            .records
            .par_iter()
            .map(|(chosen, cands)| {
                let wg: Vec<(f64, [f64; 6])> =
                    cands.iter().map(|c| self.weight_grad(c, &p)).collect();
                let max = wg.iter().map(|w| w.0).fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                let mut mean_g = [0.0; 6];
                for (s, g) in &wg {
                    let e = (s - max).exp();
                    total += e;
                    for k in 0..6 {
                        mean_g[k] += e * g[k];
                    }
                }
                let ll = wg[*chosen].0 - (max + total.ln());
                let mut grad = wg[*chosen].1;
                for k in 0..6 {
                    grad[k] -= mean_g[k] / total;
                }
                (ll, grad)
            })
            .collect();
        let ll = compensated_sum(per.iter().map(|v| v.0));
        let mut grad = [0.0; 6];
        for (k, gk) in grad.iter_mut().enumerate() {
            *gk = compensated_sum(per.iter().map(|v| v.1[k]));
        }
        (ll, grad)
    }
}

/// Indices of multiplicative factors (the rest are exponents) in the flat parameter arrays.
pub fn factor_indices(c: Configuration) -> [usize; 3] {
    match c {
        Configuration::F1 => [0, 2, 3],
        Configuration::F2 => [0, 1, 2],
    }
}

/// Upper bound on exponent parameters.
pub const EXPONENT_MAX: f64 = 50.0;
/// Bounds on multiplicative factors.
pub const FACTOR_RANGE: (f64, f64) = (1e-6, 1e6);
/// Lower bound on exponents.
pub const EXPONENT_MIN: f64 = 1e-4;

fn log_bounds(c: Configuration) -> (Vec<f64>, Vec<f64>) {
    let f = factor_indices(c);
    (0..6)
        .map(|i| {
            if f.contains(&i) {
                (FACTOR_RANGE.0.ln(), FACTOR_RANGE.1.ln())
            } else {
                (EXPONENT_MIN.ln(), EXPONENT_MAX.ln())
            }
        })
        .unzip()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub n_starts: usize,
    pub seed: u64,
    pub max_iterations: usize,
    /// Convergence threshold on the change of log-likelihood per iteration.
    pub tolerance: f64,
    pub which: Which,
    /// Log-uniform range of starting values for multiplicative factors.
    pub factor_start_range: (f64, f64),
    /// Log-uniform range of starting values for exponents.
    pub exponent_start_range: (f64, f64),
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            n_starts: 10,
            seed: 0,
            max_iterations: 500,
            tolerance: 1e-9,
            which: Which::Both,
            factor_start_range: (0.1, 50.0),
            exponent_start_range: (0.1, 5.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigFit {
    pub configuration: Configuration,
    pub params: [f64; 6],
    pub log_likelihood: f64,
    /// Best log-likelihood among the starting points.
    pub best_start_log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    /// False when every record has a single candidate, so the likelihood is constant.
    pub identifiable: bool,
    pub records: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: ModelParams,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    pub n_starts: usize,
    pub fits: Vec<ConfigFit>,
    pub warnings: Vec<String>,
}

fn start_points(c: Configuration, opts: &FitOptions) -> Vec<Vec<f64>> {
    let mut rng = stream(opts.seed, Purpose::FitStarts, c as u64);
    let factors = factor_indices(c);
    let log_uniform = |rng: &mut rand_chacha::ChaCha8Rng, (lo, hi): (f64, f64)| -> f64 {
        if hi > lo {
            rng.gen_range(lo.ln()..=hi.ln())
        } else {
            lo.ln()
        }
    };
    (0..opts.n_starts)
        .map(|_| {
            (0..6)
                .map(|i| {
                    if factors.contains(&i) {
                        log_uniform(&mut rng, opts.factor_start_range)
                    } else {
                        log_uniform(&mut rng, opts.exponent_start_range)
                    }
                })
                .collect()
        })
        .collect()
}

fn fit_configuration(
    c: Configuration,
    records: &[StepRecord],
    opts: &FitOptions,
) -> Result<ConfigFit> {
    if records.is_empty() {
        return Err(Error::Empty(format!("no {c:?} records to fit")));
    }
    let prepared = Prepared::new(c, records);
    let starts = start_points(c, opts);
    let identifiable = records.iter().any(|r| r.candidates.len() > 1);
    let start_ll: Vec<f64> = starts.iter().map(|z| prepared.evaluate(z).0).collect();
    let best_start = start_ll
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if !best_start.is_finite() {
        return Err(Error::NonFiniteLikelihood);
    }
    let to_params = |z: &[f64]| {
        let mut p = [0.0; 6];
        for (pi, zi) in p.iter_mut().zip(z) {
            *pi = zi.exp();
        }
        p
    };
    if !identifiable {
        return Ok(ConfigFit {
            configuration: c,
            params: to_params(&starts[0]),
            log_likelihood: start_ll[0],
            best_start_log_likelihood: best_start,
            iterations: 0,
            converged: true,
            identifiable: false,
            records: records.len(),
        });
    }
    let (lower, upper) = log_bounds(c);
    let bfgs = BfgsOptions {
        max_iterations: opts.max_iterations,
        f_tolerance: opts.tolerance,
        g_tolerance: 1e-8,
        lower,
        upper,
    };
    let objective = |z: &[f64]| {
        let (ll, g) = prepared.evaluate(z);
        let f = if ll.is_finite() { -ll } else { f64::INFINITY };
        (f, g.iter().map(|v| -v).collect())
    };
    let runs: Vec<optim::Minimum> = starts
        .iter()
        .map(|z0| minimize(objective, z0, &bfgs))
        .collect();
    let best = runs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.f.total_cmp(&b.1.f).then(a.0.cmp(&b.0)))
        .map(|(_, m)| m)
        .expect("at least one start");
    Ok(ConfigFit {
        configuration: c,
        params: to_params(&best.x),
        log_likelihood: -best.f,
        best_start_log_likelihood: best_start,
        iterations: runs.iter().map(|m| m.iterations).sum(),
        converged: best.converged,
        identifiable: true,
        records: records.len(),
    })
}

/// Fits the selected configurations; parameters of a configuration not
/// selected are taken from `base`.
pub fn fit_with_base(ts: &TrainingSet, opts: &FitOptions, base: ModelParams) -> Result<FitResult> {
    if opts.n_starts == 0 {
        return Err(Error::InvalidArgument(
            "at least one start is required".into(),
        ));
    }
    ts.validate()?;
    let fits = opts
        .which
        .configurations()
        .iter()
        .map(|&c| fit_configuration(c, ts.records(c), opts))
        .collect::<Result<Vec<_>>>()?;
    let mut params = base;
    let mut warnings = Vec::new();
    for f in &fits {
        params.set(f.configuration, f.params);
        let factors = factor_indices(f.configuration);
        for (i, &v) in f.params.iter().enumerate() {
            let (lo, hi) = if factors.contains(&i) {
                FACTOR_RANGE
            } else {
                (EXPONENT_MIN, EXPONENT_MAX)
            };
            if v <= lo * (1.0 + 1e-9) || v >= hi * (1.0 - 1e-9) {
                let msg = format!(
                    "{:?} parameter {} = {v} sits on its bound",
                    f.configuration,
                    i + 1
                );
                log::warn!("{msg}");
                warnings.push(msg);
            }
        }
        if !f.identifiable {
            warnings.push(format!(
                "{:?} likelihood is constant (single-candidate records only)",
                f.configuration
            ));
        }
        if !f.converged {
            warnings.push(format!("{:?} fit hit the iteration limit", f.configuration));
        }
    }
    Ok(FitResult {
        params,
        log_likelihood: compensated_sum(fits.iter().map(|f| f.log_likelihood)),
        iterations: fits.iter().map(|f| f.iterations).sum(),
        converged: fits.iter().all(|f| f.converged),
        n_starts: opts.n_starts,
        fits,
        warnings,
    })
}

/// Multi-start maximum-likelihood fit.
pub fn fit(ts: &TrainingSet, opts: &FitOptions) -> Result<FitResult> {
    fit_with_base(ts, opts, ModelParams::default())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub size: usize,
    pub params: ModelParams,
    pub log_likelihood: f64,
}

/// Refits on the first `size` microstructures for each requested size.
pub fn stability_curve(
    ts: &TrainingSet,
    sizes: &[usize],
    opts: &FitOptions,
) -> Result<Vec<StabilityRow>> {
    let q = ts.provenance.len();
    for &s in sizes {
        if s == 0 || s > q {
            return Err(Error::InvalidArgument(format!(
                "training size {s} outside [1, {q}]"
            )));
        }
    }
    sizes
        .iter()
        .map(|&size| {
            let r = fit(&ts.prefix(size), opts)?;
            Ok(StabilityRow {
                size,
                params: r.params,
                log_likelihood: r.log_likelihood,
            })
        })
        .collect()
}

/// Synthetic training data: `n` generated microstructures, one simulated crack
/// each from the default start, replayed into step records.
///
/// Microstructure `i` uses morphology seed `derive_seed(derive_seed(seed, Training), i)`
/// and its crack is member 0 of an ensemble with that seed as master.
pub fn synthesize_training_set(
    n: usize,
    morphology: &MorphologyConfig,
    params: &ModelParams,
    points_per_side: usize,
    seed: u64,
) -> Result<(TrainingSet, Vec<CrackPath>)> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "need at least one microstructure".into(),
        ));
    }
    params.validate()?;
    let base = derive_seed(seed, Purpose::Training as u64);
    let per: Vec<(Vec<StepRecord>, CrackPath)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let ms_seed = derive_seed(base, i as u64);
            let m = generate(&MorphologyConfig {
                seed: ms_seed,
                ..morphology.clone()
            })?;
            let dm = discretize(&m, points_per_side)?;
            let start = crate::prediction::default_start(&dm);
            let path = simulate_crack(
                &dm,
                start,
                UnitVector::PLUS_X,
                params,
                path_seed(ms_seed, 0),
            )?;
            let records = extract_steps(&dm, &path.points, UnitVector::PLUS_X, i)?;
            Ok((records, path))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut ts = TrainingSet {
        provenance: (0..n).map(|i| format!("synthetic-{seed}-{i}")).collect(),
        ..TrainingSet::default()
    };
    let mut paths = Vec::with_capacity(n);
    for (records, path) in per {
        ts.extend(records);
        paths.push(path);
    }
    Ok((ts, paths))
}
