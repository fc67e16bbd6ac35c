//! File formats. Everything is plain JSON or CSV; floats are written with the
//! shortest representation that round-trips, so equal values give equal bytes.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::path::Path;

use crate::analysis::{ConfidenceRegion, DensityEstimate, TortuosityStats};
use crate::error::{Error, Result};
use crate::estimation::TrainingSet;
use crate::geometry::{Microstructure, Point2, UnitVector};
use crate::model::ModelParams;
use crate::prediction::{CrackPath, Ensemble};

/// Version stamped into every structured output.
pub const SCHEMA_VERSION: u32 = 1;

/// The default kernel parameters as shipped.
pub const DEFAULT_PARAMS_JSON: &str = include_str!("../data/default_params.json");

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json(value)?)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn read_microstructure(path: &Path) -> Result<Microstructure> {
    let m: Microstructure = read_json(path)?;
    m.validate()?;
    Ok(m)
}

pub fn parse_params(text: &str) -> Result<ModelParams> {
    let p: ModelParams = serde_json::from_str(text)?;
    p.validate()?;
    Ok(p)
}

pub fn read_params(path: &Path) -> Result<ModelParams> {
    parse_params(&fs::read_to_string(path)?)
}

pub fn read_training_set(path: &Path) -> Result<TrainingSet> {
    let ts: TrainingSet = read_json(path)?;
    ts.validate()?;
    if ts.records_f1.is_empty() && ts.records_f2.is_empty() {
        return Err(Error::Empty(format!(
            "{} holds no step records",
            path.display()
        )));
    }
    Ok(ts)
}

/// SHA-256 of the compact JSON encoding of `p`, hex encoded.
pub fn params_hash(p: &ModelParams) -> String {
    let bytes = serde_json::to_vec(p).expect("parameters always serialize");
    Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Content-derived microstructure identifier: `ms-` and 16 hex digits of SHA-256.
pub fn microstructure_id(m: &Microstructure) -> String {
    let bytes = serde_json::to_vec(m).expect("microstructures always serialize");
    let digest = Sha256::digest(&bytes);
    let hex: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
    format!("ms-{hex}")
}

/// Ensemble of predicted cracks with the metadata needed to reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleFile {
    pub schema_version: u32,
    pub microstructure_id: String,
    pub master_seed: u64,
    pub params_hash: String,
    pub params: ModelParams,
    pub start: Point2,
    pub direction: UnitVector,
    pub points_per_side: usize,
    pub paths: Vec<CrackPath>,
}

impl EnsembleFile {
    pub fn new(
        e: Ensemble,
        params: ModelParams,
        start: Point2,
        direction: UnitVector,
        points_per_side: usize,
    ) -> Self {
        EnsembleFile {
            schema_version: SCHEMA_VERSION,
            microstructure_id: e.microstructure_id,
            master_seed: e.master_seed,
            params_hash: params_hash(&params),
            params,
            start,
            direction,
            points_per_side,
            paths: e.paths,
        }
    }

    pub fn ensemble(&self) -> Ensemble {
        Ensemble {
            microstructure_id: self.microstructure_id.clone(),
            master_seed: self.master_seed,
            paths: self.paths.clone(),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let f: EnsembleFile = read_json(path)?;
        if f.paths.is_empty() {
            return Err(Error::Empty(format!("{} holds no paths", path.display())));
        }
        if f.params_hash != params_hash(&f.params) {
            return Err(Error::InvalidArgument(format!(
                "{}: parameter hash mismatch",
                path.display()
            )));
        }
        Ok(f)
    }
}

/// Ensemble statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatisticsFile {
    pub schema_version: u32,
    pub microstructure_id: String,
    pub n_paths: usize,
    pub median_index: usize,
    pub median_path: Vec<Point2>,
    pub region: Option<ConfidenceRegion>,
    pub tortuosity: TortuosityStats,
    pub tortuosity_density: Option<DensityEstimate>,
}

/// Reproducibility record written next to every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    pub arguments: Vec<String>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub seed: Option<u64>,
    pub params_hash: Option<String>,
    pub tool_version: String,
    pub wall_time_seconds: f64,
}

/// `<output>.manifest.json`.
pub fn manifest_path(output: &Path) -> std::path::PathBuf {
    let mut name = output
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".manifest.json");
    output.with_file_name(name)
}

/// CSV text from a header and rows of numbers.
pub fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}
