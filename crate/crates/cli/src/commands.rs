use serde::de::DeserializeOwned;
use serde::Serialize;
use std::path::PathBuf;
use std::time::Instant;

use crackpath_core::analysis::{
    confidence_region, kde, median_path, tortuosity_stats, Bandwidth, DensityEstimate,
};
use crackpath_core::estimation::{
    fit_with_base, stability_curve, synthesize_training_set, FitOptions, Which,
};
use crackpath_core::geometry::{
    discretize, DiscretizationPoint, Microstructure, Point2, UnitVector,
};
use crackpath_core::io::{
    self, manifest_path, microstructure_id, params_hash, EnsembleFile, RunManifest, StatisticsFile,
    SCHEMA_VERSION,
};
use crackpath_core::model::ModelParams;
use crackpath_core::morphology::{
    covariogram, generate, volume_fraction, Circumradius, MorphologyConfig, ShapeFamily,
};
use crackpath_core::prediction::{default_start, ensemble};
use crackpath_core::selftest::{self, SelftestOptions};
use crackpath_core::svg::{render, Overlay};
use crackpath_core::{Ensemble, Error, Result};

use crate::{
    AnalyzeArgs, Cli, Command, CovariogramArgs, DiscretizeArgs, Failure, Fault, FitArgs,
    GenerateArgs, MorphologyArgs, PredictArgs, SelftestArgs, StatsArgs, SynthesizeArgs, WhichArg,
};

/// Bookkeeping for one command run; writes the manifests at the end.
struct Run<'a> {
    cli: &'a Cli,
    name: &'static str,
    started: Instant,
    inputs: Vec<String>,
    outputs: Vec<PathBuf>,
    params_hash: Option<String>,
}

impl<'a> Run<'a> {
    fn new(cli: &'a Cli, name: &'static str) -> Self {
        Run {
            cli,
            name,
            started: Instant::now(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            params_hash: None,
        }
    }

    fn path(&self, given: &Option<PathBuf>, default_name: &str) -> PathBuf {
        given
            .clone()
            .unwrap_or_else(|| self.cli.dir.join(default_name))
    }

    fn input(&mut self, given: &Option<PathBuf>, default_name: &str) -> PathBuf {
        let p = self.path(given, default_name);
        self.inputs.push(p.display().to_string());
        p
    }

    /// Writes JSON, reads it back and checks it round-trips.
    fn json<T: Serialize + DeserializeOwned + PartialEq>(
        &mut self,
        path: PathBuf,
        value: &T,
    ) -> Result<()> {
        io::write_json(&path, value)?;
        let back: T = io::read_json(&path)?;
        if &back != value {
            return Err(Error::InvalidArgument(format!(
                "{} did not round-trip",
                path.display()
            )));
        }
        self.outputs.push(path);
        Ok(())
    }

    fn text(&mut self, path: PathBuf, text: &str) -> Result<()> {
        io::write_text(&path, text)?;
        self.outputs.push(path);
        Ok(())
    }

    fn finish(self) -> Result<()> {
        let outputs: Vec<String> = self
            .outputs
            .iter()
            .map(|p| p.display().to_string())
            .collect();
        let manifest = RunManifest {
            schema_version: SCHEMA_VERSION,
            command: self.name.into(),
            arguments: std::env::args().skip(1).collect(),
            inputs: self.inputs,
            outputs: outputs.clone(),
            seed: Some(self.cli.seed),
            params_hash: self.params_hash,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            wall_time_seconds: self.started.elapsed().as_secs_f64(),
        };
        for out in &self.outputs {
            io::write_json(&manifest_path(out), &manifest)?;
        }
        for out in outputs {
            println!("wrote {out}");
        }
        Ok(())
    }
}

pub fn run(cli: &Cli) -> std::result::Result<(), Failure> {
    match &cli.command {
        Command::Generate(a) => cmd_generate(cli, a)?,
        Command::Discretize(a) => cmd_discretize(cli, a)?,
        Command::SynthesizeTraining(a) => cmd_synthesize(cli, a)?,
        Command::Fit(a) => cmd_fit(cli, a)?,
        Command::Predict(a) => cmd_predict(cli, a)?,
        Command::Analyze(a) => cmd_analyze(cli, a)?,
        Command::Covariogram(a) => cmd_covariogram(cli, a)?,
        Command::Selftest(a) => return cmd_selftest(cli, a),
    }
    Ok(())
}

fn parse_shape(s: &str) -> Result<ShapeFamily> {
    match s {
        "square" => Ok(ShapeFamily::SQUARE),
        "multiform" | "mixed" => Ok(ShapeFamily::MULTIFORM),
        n => n
            .parse()
            .map(ShapeFamily::Regular)
            .map_err(|_| Error::InvalidArgument(format!("unknown shape {n:?}"))),
    }
}

fn parse_radius(s: &str) -> Result<Circumradius> {
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| Error::InvalidArgument(format!("bad radius {s:?}")))
    };
    match s.split_once(':') {
        Some((lo, hi)) => Ok(Circumradius::Range {
            min: num(lo)?,
            max: num(hi)?,
        }),
        None => Ok(Circumradius::Fixed(num(s)?)),
    }
}

fn morphology_config(a: &MorphologyArgs, seed: u64) -> Result<MorphologyConfig> {
    let c = MorphologyConfig {
        width: a.width,
        height: a.height,
        target_volume_fraction: a.vf,
        shape_family: parse_shape(&a.shape)?,
        circumradius: parse_radius(&a.radius)?,
        min_gap: a.min_gap,
        seed,
        max_attempts: a.max_attempts,
    };
    c.validate()?;
    Ok(c)
}

fn load_params(run: &mut Run, given: &Option<PathBuf>) -> Result<ModelParams> {
    let p = match given {
        Some(path) => {
            run.inputs.push(path.display().to_string());
            io::read_params(path)?
        }
        None => ModelParams::default(),
    };
    run.params_hash = Some(params_hash(&p));
    Ok(p)
}

fn cmd_generate(cli: &Cli, a: &GenerateArgs) -> Result<()> {
    let mut run = Run::new(cli, "generate");
    let m = generate(&morphology_config(&a.morphology, cli.seed)?)?;
    eprintln!(
        "{} aggregates, volume fraction {:.4}",
        m.aggregates.len(),
        volume_fraction(&m)
    );
    let out = run.path(&a.out, "microstructure.json");
    run.json(out, &m)?;
    run.finish()
}

#[derive(Debug, PartialEq, Serialize, serde::Deserialize)]
struct DiscretizationFile {
    schema_version: u32,
    points_per_side: usize,
    points: Vec<DiscretizationPoint>,
}

fn cmd_discretize(cli: &Cli, a: &DiscretizeArgs) -> Result<()> {
    let mut run = Run::new(cli, "discretize");
    let m = io::read_microstructure(&run.input(&a.microstructure, "microstructure.json"))?;
    let dm = discretize(&m, a.points_per_side)?;
    let out = run.path(&a.out, "discretization.json");
    run.json(
        out,
        &DiscretizationFile {
            schema_version: SCHEMA_VERSION,
            points_per_side: a.points_per_side,
            points: dm.points,
        },
    )?;
    run.finish()
}

fn cmd_synthesize(cli: &Cli, a: &SynthesizeArgs) -> Result<()> {
    let mut run = Run::new(cli, "synthesize-training");
    let params = load_params(&mut run, &a.params)?;
    let config = morphology_config(&a.morphology, 0)?;
    let (ts, paths) = synthesize_training_set(a.n, &config, &params, a.points_per_side, cli.seed)?;
    eprintln!(
        "{} F1 records, {} F2 records",
        ts.records_f1.len(),
        ts.records_f2.len()
    );
    let out = run.path(&a.out, "training.json");
    run.json(out, &ts)?;
    if let Some(p) = &a.paths_out {
        run.json(p.clone(), &paths)?;
    }
    run.finish()
}

fn cmd_fit(cli: &Cli, a: &FitArgs) -> Result<()> {
    let mut run = Run::new(cli, "fit");
    let ts = io::read_training_set(&run.input(&a.training, "training.json"))?;
    let opts = FitOptions {
        n_starts: a.starts,
        seed: cli.seed,
        max_iterations: a.max_iterations,
        tolerance: a.tolerance,
        which: match a.which {
            WhichArg::Both => Which::Both,
            WhichArg::F1 => Which::F1,
            WhichArg::F2 => Which::F2,
        },
        ..FitOptions::default()
    };
    if let Some(&s) = a.sizes.iter().find(|&&s| s == 0 || s > ts.provenance.len()) {
        return Err(Error::InvalidArgument(format!(
            "training size {s} outside [1, {}]",
            ts.provenance.len()
        )));
    }
    let result = fit_with_base(&ts, &opts, ModelParams::default())?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    eprintln!("log-likelihood {}", result.log_likelihood);
    run.params_hash = Some(params_hash(&result.params));
    let out = run.path(&a.out, "params.json");
    run.json(out, &result.params)?;
    let report = run.path(&a.report, "fit_report.json");
    run.json(report, &result)?;
    if !a.sizes.is_empty() {
        let rows = stability_curve(&ts, &a.sizes, &opts)?;
        let mut header = vec!["size", "log_likelihood"];
        header.extend(["mu1", "mu2", "mu3", "mu4", "mu5", "mu6"]);
        header.extend([
            "lambda1", "lambda2", "lambda3", "lambda4", "lambda5", "lambda6",
        ]);
        let csv = io::csv(
            &header,
            rows.iter().map(|r| {
                let mut v = vec![r.size as f64, r.log_likelihood];
                v.extend(r.params.f1.to_array());
                v.extend(r.params.f2.to_array());
                v
            }),
        );
        let out = run.path(&a.stability_out, "stability.csv");
        run.text(out, &csv)?;
    }
    run.finish()
}

fn parse_bandwidth(s: &str) -> Result<Bandwidth> {
    if s == "auto" {
        return Ok(Bandwidth::Auto);
    }
    s.parse().map(Bandwidth::Fixed).map_err(|_| {
        Error::InvalidArgument(format!("bandwidth must be `auto` or a number, got {s:?}"))
    })
}

fn write_statistics(
    run: &mut Run,
    e: &Ensemble,
    m: Option<&Microstructure>,
    width: f64,
    a: &StatsArgs,
) -> Result<()> {
    let (median_index, median) = median_path(e)?;
    let region = if e.paths.len() >= 2 {
        Some(confidence_region(e, a.grid_size, width)?)
    } else {
        None
    };
    let tortuosity = tortuosity_stats(e, a.bins)?;
    let bandwidth = parse_bandwidth(&a.bandwidth)?;
    let tortuosity_density: Option<DensityEstimate> =
        match kde(&tortuosity.values, bandwidth, a.density_points) {
            Ok(d) => Some(d),
            Err(Error::Degenerate(msg)) => {
                eprintln!("warning: no tortuosity density ({msg})");
                None
            }
            Err(err) => return Err(err),
        };
    if let Some(r) = &region {
        eprintln!(
            "confidence region diameter {:.6} m (ranks {:?})",
            r.diameter, r.ranks
        );
    }
    eprintln!(
        "tortuosity median {:.5}, interval [{:.5}, {:.5}]",
        tortuosity.median, tortuosity.interval.0, tortuosity.interval.1
    );
    let stats = StatisticsFile {
        schema_version: SCHEMA_VERSION,
        microstructure_id: e.microstructure_id.clone(),
        n_paths: e.paths.len(),
        median_index,
        median_path: median.points.clone(),
        region: region.clone(),
        tortuosity,
        tortuosity_density,
    };
    let stats_path = run.path(&a.stats, "statistics.json");
    run.json(stats_path, &stats)?;
    if let Some(r) = &region {
        let csv = io::csv(
            &["x", "lower", "upper"],
            r.grid
                .iter()
                .zip(&r.lower)
                .zip(&r.upper)
                .map(|((&x, &lo), &hi)| vec![x, lo, hi]),
        );
        let csv_path = run.path(&a.csv, "region.csv");
        run.text(csv_path, &csv)?;
    }
    if let (Some(m), false) = (m, a.no_svg) {
        let svg = render(&Overlay {
            microstructure: m,
            paths: &e.paths,
            median: Some(median),
            region: region.as_ref(),
        });
        let svg_path = run.path(&a.svg, "overlay.svg");
        run.text(svg_path, &svg)?;
    }
    Ok(())
}

fn cmd_predict(cli: &Cli, a: &PredictArgs) -> Result<()> {
    let mut run = Run::new(cli, "predict");
    let m = io::read_microstructure(&run.input(&a.microstructure, "microstructure.json"))?;
    let params = load_params(&mut run, &a.params)?;
    let dm = discretize(&m, a.points_per_side)?;
    let start = match a.start_y {
        Some(y) => Point2::new(0.0, y),
        None => default_start(&dm),
    };
    let e = ensemble(
        &dm,
        &microstructure_id(&m),
        start,
        UnitVector::PLUS_X,
        &params,
        a.count,
        cli.seed,
    )?;
    let file = EnsembleFile::new(
        e.clone(),
        params,
        start,
        UnitVector::PLUS_X,
        a.points_per_side,
    );
    let out = run.path(&a.out, "ensemble.json");
    run.json(out, &file)?;
    write_statistics(&mut run, &e, Some(&m), m.width, &a.stats)?;
    run.finish()
}

fn cmd_analyze(cli: &Cli, a: &AnalyzeArgs) -> Result<()> {
    let mut run = Run::new(cli, "analyze");
    let file = EnsembleFile::read(&run.input(&a.ensemble, "ensemble.json"))?;
    run.params_hash = Some(file.params_hash.clone());
    let ms_path = run.path(&a.microstructure, "microstructure.json");
    let m = if a.microstructure.is_some() || ms_path.exists() {
        run.inputs.push(ms_path.display().to_string());
        Some(io::read_microstructure(&ms_path)?)
    } else {
        None
    };
    let width = match &m {
        Some(m) => m.width,
        None => file
            .paths
            .iter()
            .flat_map(|p| p.points.iter().map(|q| q.x))
            .fold(0.0, f64::max),
    };
    write_statistics(&mut run, &file.ensemble(), m.as_ref(), width, &a.stats)?;
    run.finish()
}

fn cmd_covariogram(cli: &Cli, a: &CovariogramArgs) -> Result<()> {
    let mut run = Run::new(cli, "covariogram");
    let m = io::read_microstructure(&run.input(&a.microstructure, "microstructure.json"))?;
    let lags: Vec<f64> = if a.lags.is_empty() {
        if a.n_lags < 2 {
            return Err(Error::InvalidArgument("--n-lags must be at least 2".into()));
        }
        (0..a.n_lags)
            .map(|k| a.max_lag * k as f64 / (a.n_lags - 1) as f64)
            .collect()
    } else {
        a.lags.clone()
    };
    let c = covariogram(&m, &lags, a.samples, cli.seed)?;
    let csv = io::csv(
        &["lag", "value", "standard_error"],
        (0..lags.len()).map(|k| vec![c.lags[k], c.values[k], c.standard_error(k)]),
    );
    let out = run.path(&a.out, "covariogram.csv");
    run.text(out, &csv)?;
    run.finish()
}

fn cmd_selftest(cli: &Cli, a: &SelftestArgs) -> std::result::Result<(), Failure> {
    let mut run = Run::new(cli, "selftest");
    let opts = SelftestOptions {
        seed: cli.seed,
        shadow_cases: a.shadow_cases,
        frechet_cases: a.frechet_cases,
        normalization_cases: a.normalization_cases,
        recovery_microstructures: a.recovery_microstructures,
        kernel: match a.inject_fault {
            Some(Fault::KernelSign) => selftest::sign_flipped_kernel,
            None => crackpath_core::model::log_weight,
        },
    };
    let report = selftest::run(&opts)?;
    for s in &report.suites {
        let status = if s.passed() { "PASS" } else { "FAIL" };
        println!(
            "{status} {} ({} cases, {} failures)",
            s.name, s.cases, s.failures
        );
        if let Some(ex) = &s.example {
            println!("     first failure: {ex}");
        }
    }
    if let Some(out) = &a.out {
        run.json(out.clone(), &report)?;
    }
    run.finish()?;
    if report.passed {
        Ok(())
    } else {
        let failed: Vec<&str> = report
            .suites
            .iter()
            .filter(|s| !s.passed())
            .map(|s| s.name.as_str())
            .collect();
        Err(Failure::Selftest(format!(
            "failed suites: {}",
            failed.join(", ")
        )))
    }
}
