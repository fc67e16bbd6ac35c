//! Ensemble statistics: median path, percentile confidence region, tortuosity.

mod frechet;
mod kde;

pub use frechet::discrete_frechet;
pub use kde::{kde, silverman_bandwidth, Bandwidth, DensityEstimate};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::prediction::{CrackPath, Ensemble};

pub const DEFAULT_GRID_SIZE: usize = 200;
pub const DEFAULT_HISTOGRAM_BINS: usize = 20;

/// 1-based ordered-sample indices `(⌊0.05M⌋, ⌈0.95M⌉)` of the 5% and 95%
/// percentiles, clamped to `[1, M]` for small samples.
pub fn percentile_ranks(m: usize) -> (usize, usize) {
    // Integer arithmetic: 0.95·M in floating point can land just above an integer.
    let lo = (5 * m / 100).clamp(1, m);
    let hi = (95 * m).div_ceil(100).clamp(1, m);
    (lo, hi)
}

fn sorted(values: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.into_iter().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Piecewise-linear `h(x¹)` through the crack vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathFunction {
    pub breakpoints: Vec<Point2>,
}

impl PathFunction {
    /// Height of the crack at abscissa `x`. Where several segments cover `x`
    /// (vertical runs) the last one along the path wins; outside the covered
    /// range the nearest end value is returned.
    pub fn eval(&self, x: f64) -> f64 {
        let b = &self.breakpoints;
        if b.len() == 1 {
            return b[0].y;
        }
        for w in b.windows(2).rev() {
            let (p, q) = (w[0], w[1]);
            let (lo, hi) = if p.x <= q.x { (p.x, q.x) } else { (q.x, p.x) };
            if x < lo || x > hi {
                continue;
            }
            if q.x == p.x {
                return q.y;
            }
            return p.y + (q.y - p.y) * (x - p.x) / (q.x - p.x);
        }
        let first = b[0];
        let last = b[b.len() - 1];
        if (x - first.x).abs() <= (x - last.x).abs() {
            first.y
        } else {
            last.y
        }
    }
}

pub fn path_function(p: &CrackPath) -> Result<PathFunction> {
    if p.points.is_empty() {
        return Err(Error::Empty("path has no points".into()));
    }
    Ok(PathFunction {
        breakpoints: p.points.clone(),
    })
}

/// Ensemble member minimizing the summed Fréchet distance to all others;
/// ties go to the lowest index. Returns the index and the path.
pub fn median_path(e: &Ensemble) -> Result<(usize, &CrackPath)> {
    let n = e.paths.len();
    if n == 0 {
        return Err(Error::Empty("ensemble has no paths".into()));
    }
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let dists = pairs
        .par_iter()
        .map(|&(i, j)| discrete_frechet(&e.paths[i].points, &e.paths[j].points))
        .collect::<Result<Vec<f64>>>()?;
    let mut matrix = vec![0.0; n * n];
    for (&(i, j), d) in pairs.iter().zip(dists) {
        matrix[i * n + j] = d;
        matrix[j * n + i] = d;
    }
    let mut best = (0, f64::INFINITY);
    for k in 0..n {
        let s: f64 = matrix[k * n..(k + 1) * n].iter().sum();
        if s < best.1 {
            best = (k, s);
        }
    }
    Ok((best.0, &e.paths[best.0]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceRegion {
    pub grid: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Discrete Fréchet distance between the lower and upper curves.
    pub diameter: f64,
    /// 1-based ranks used for the lower and upper curves.
    pub ranks: (usize, usize),
}

/// Pointwise 5%/95% order statistics of the path functions on a uniform grid over `[0, width]`.
pub fn confidence_region(e: &Ensemble, grid_size: usize, width: f64) -> Result<ConfidenceRegion> {
    let m = e.paths.len();
    if m < 2 {
        return Err(Error::InvalidArgument(format!(
            "confidence region needs at least 2 paths, got {m}"
        )));
    }
    if grid_size < 2 {
        return Err(Error::InvalidArgument(
            "grid_size must be at least 2".into(),
        ));
    }
    let funcs = e
        .paths
        .iter()
        .map(path_function)
        .collect::<Result<Vec<_>>>()?;
    let ranks = percentile_ranks(m);
    let grid: Vec<f64> = (0..grid_size)
        .map(|k| width * k as f64 / (grid_size - 1) as f64)
        .collect();
    let (lower, upper): (Vec<f64>, Vec<f64>) = grid
        .iter()
        .map(|&x| {
            let s = sorted(funcs.iter().map(|f| f.eval(x)));
            (s[ranks.0 - 1], s[ranks.1 - 1])
        })
        .unzip();
    let lo_curve: Vec<Point2> = grid
        .iter()
        .zip(&lower)
        .map(|(&x, &y)| Point2::new(x, y))
        .collect();
    let hi_curve: Vec<Point2> = grid
        .iter()
        .zip(&upper)
        .map(|(&x, &y)| Point2::new(x, y))
        .collect();
    Ok(ConfidenceRegion {
        diameter: discrete_frechet(&lo_curve, &hi_curve)?,
        grid,
        lower,
        upper,
        ranks,
    })
}

/// Crack length over end-to-end chord length.
pub fn tortuosity(p: &CrackPath) -> Result<f64> {
    let pts = &p.points;
    if pts.len() < 2 {
        return Err(Error::InvalidArgument(
            "tortuosity needs at least 2 points".into(),
        ));
    }
    let chord = pts[0].distance(pts[pts.len() - 1]);
    if chord == 0.0 {
        return Err(Error::Degenerate("crack endpoints coincide".into()));
    }
    let length: f64 = pts.windows(2).map(|w| w[0].distance(w[1])).sum();
    // Rounding can push a straight path a hair below 1.
    Ok((length / chord).max(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

pub fn histogram(values: &[f64], bins: usize) -> Result<Histogram> {
    if values.is_empty() || bins == 0 {
        return Err(Error::InvalidArgument(
            "histogram needs values and at least one bin".into(),
        ));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bins as f64;
    let edges = (0..=bins).map(|k| lo + width * k as f64).collect();
    let mut counts = vec![0; bins];
    for &v in values {
        let k = if width > 0.0 {
            (((v - lo) / width) as usize).min(bins - 1)
        } else {
            0
        };
        counts[k] += 1;
    }
    Ok(Histogram { edges, counts })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TortuosityStats {
    pub values: Vec<f64>,
    pub median: f64,
    pub interval: (f64, f64),
    pub histogram: Histogram,
}

pub fn tortuosity_stats(e: &Ensemble, bins: usize) -> Result<TortuosityStats> {
    if e.paths.is_empty() {
        return Err(Error::Empty("ensemble has no paths".into()));
    }
    let values = e.paths.iter().map(tortuosity).collect::<Result<Vec<_>>>()?;
    let s = sorted(values.iter().copied());
    let m = s.len();
    let median = if m % 2 == 1 {
        s[m / 2]
    } else {
        0.5 * (s[m / 2 - 1] + s[m / 2])
    };
    let (lo, hi) = percentile_ranks(m);
    Ok(TortuosityStats {
        histogram: histogram(&values, bins)?,
        median,
        interval: (s[lo - 1], s[hi - 1]),
        values,
    })
}
