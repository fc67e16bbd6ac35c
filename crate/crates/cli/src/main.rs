mod commands;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

use crackpath_core::Error;

#[derive(Parser, Debug)]
#[command(
    name = "crackpath",
    version,
    about = "Stochastic crack path surrogate for two-phase microstructures"
)]
pub struct Cli {
    /// Master seed; every random stream is derived from it.
    #[arg(long, global = true, default_value_t = 0, env = "CRACKPATH_SEED")]
    pub seed: u64,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true, env = "CRACKPATH_THREADS")]
    pub threads: Option<usize>,
    /// Directory holding default input and output files.
    #[arg(long, global = true, default_value = ".", env = "CRACKPATH_DIR")]
    pub dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a random microstructure.
    Generate(GenerateArgs),
    /// Write the boundary discretization points of a microstructure.
    Discretize(DiscretizeArgs),
    /// Simulate cracks on generated microstructures and record their steps.
    SynthesizeTraining(SynthesizeArgs),
    /// Fit kernel parameters by maximum likelihood.
    Fit(FitArgs),
    /// Predict an ensemble of cracks and its statistics.
    Predict(PredictArgs),
    /// Recompute statistics of an ensemble file.
    Analyze(AnalyzeArgs),
    /// Monte Carlo covariogram of a microstructure.
    Covariogram(CovariogramArgs),
    /// Run the oracle suites.
    Selftest(SelftestArgs),
}

#[derive(Args, Debug, Clone)]
pub struct MorphologyArgs {
    /// Target aggregate volume fraction.
    #[arg(long, default_value_t = 0.25)]
    pub vf: f64,
    /// square, multiform (3 to 8 sides) or the number of sides.
    #[arg(long, default_value = "square")]
    pub shape: String,
    #[arg(long, default_value_t = 0.6)]
    pub width: f64,
    #[arg(long, default_value_t = 0.225)]
    pub height: f64,
    /// Circumradius (m); a range `min:max` draws it uniformly.
    #[arg(long, default_value = "0.015")]
    pub radius: String,
    #[arg(long, default_value_t = 0.002)]
    pub min_gap: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_attempts: usize,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub morphology: MorphologyArgs,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DiscretizeArgs {
    #[arg(long, env = "CRACKPATH_MICROSTRUCTURE")]
    pub microstructure: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub points_per_side: usize,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SynthesizeArgs {
    /// Number of microstructures.
    #[arg(short, long, default_value_t = 35)]
    pub n: usize,
    /// Generating parameters (defaults to the built-in values).
    #[arg(long, env = "CRACKPATH_PARAMS")]
    pub params: Option<PathBuf>,
    #[command(flatten)]
    pub morphology: MorphologyArgs,
    #[arg(long, default_value_t = 5)]
    pub points_per_side: usize,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Also write the simulated cracks.
    #[arg(long)]
    pub paths_out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum WhichArg {
    Both,
    F1,
    F2,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[arg(long, env = "CRACKPATH_TRAINING")]
    pub training: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub starts: usize,
    #[arg(long, default_value_t = 500)]
    pub max_iterations: usize,
    #[arg(long, default_value_t = 1e-9)]
    pub tolerance: f64,
    #[arg(long, value_enum, default_value_t = WhichArg::Both)]
    pub which: WhichArg,
    /// Training sizes for the stability curve, e.g. 5,10,15,20,25,30,35.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Vec<usize>,
    /// Fitted parameter file.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub stability_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    #[arg(long, default_value_t = 200)]
    pub grid_size: usize,
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
    /// Bandwidth of the tortuosity density, or `auto`.
    #[arg(long, default_value = "auto")]
    pub bandwidth: String,
    #[arg(long, default_value_t = 512)]
    pub density_points: usize,
    #[arg(long)]
    pub stats: Option<PathBuf>,
    /// Confidence region as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Skip the SVG overlay.
    #[arg(long)]
    pub no_svg: bool,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long, env = "CRACKPATH_MICROSTRUCTURE")]
    pub microstructure: Option<PathBuf>,
    #[arg(long, env = "CRACKPATH_PARAMS")]
    pub params: Option<PathBuf>,
    /// Ensemble size.
    #[arg(short = 'm', long, default_value_t = 100)]
    pub count: usize,
    #[arg(long, default_value_t = 5)]
    pub points_per_side: usize,
    /// Start height on the left boundary (default: mid-height).
    #[arg(long)]
    pub start_y: Option<f64>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub stats: StatsArgs,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[arg(long, env = "CRACKPATH_ENSEMBLE")]
    pub ensemble: Option<PathBuf>,
    /// Needed for the domain width and the SVG overlay.
    #[arg(long, env = "CRACKPATH_MICROSTRUCTURE")]
    pub microstructure: Option<PathBuf>,
    #[command(flatten)]
    pub stats: StatsArgs,
}

#[derive(Args, Debug)]
pub struct CovariogramArgs {
    #[arg(long, env = "CRACKPATH_MICROSTRUCTURE")]
    pub microstructure: Option<PathBuf>,
    /// Explicit lags (m); overrides --max-lag/--n-lags.
    #[arg(long, value_delimiter = ',')]
    pub lags: Vec<f64>,
    #[arg(long, default_value_t = 0.06)]
    pub max_lag: f64,
    #[arg(long, default_value_t = 31)]
    pub n_lags: usize,
    #[arg(long, default_value_t = 20_000)]
    pub samples: usize,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum Fault {
    KernelSign,
}

#[derive(Args, Debug)]
pub struct SelftestArgs {
    #[arg(long, default_value_t = 1000)]
    pub shadow_cases: usize,
    #[arg(long, default_value_t = 500)]
    pub frechet_cases: usize,
    #[arg(long, default_value_t = 10_000)]
    pub normalization_cases: usize,
    #[arg(long, default_value_t = 5)]
    pub recovery_microstructures: usize,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Corrupt a component to check the suites catch it.
    #[arg(long, value_enum, hide = true)]
    pub inject_fault: Option<Fault>,
}

/// Failure of a command: a library error or a failed self-test.
pub enum Failure {
    Core(Error),
    Selftest(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn category(&self) -> &'static str {
        match self {
            Failure::Core(e) => e.category(),
            Failure::Selftest(_) => "selftest-failed",
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Core(e) => e.to_string(),
            Failure::Selftest(m) => m.clone(),
        }
    }

    fn exit_code(&self) -> u8 {
        match self.category() {
            "invalid-argument" => 3,
            "invalid-geometry" => 4,
            "degenerate" => 5,
            "empty-input" => 6,
            "placement-exhausted" => 7,
            "step-limit" => 8,
            "inconsistent-training-data" => 9,
            "numerical" => 10,
            "io" => 11,
            "format" => 12,
            "selftest-failed" => 13,
            _ => 1,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!(
                "{}",
                serde_json::json!({"error": "invalid-argument", "message": e.to_string()})
            );
            return ExitCode::from(3);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!(
                "{}",
                serde_json::json!({"error": f.category(), "message": f.message()})
            );
            ExitCode::from(f.exit_code())
        }
    }
}
