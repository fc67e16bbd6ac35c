//! Random microstructures by hard-core sequential placement of regular
//! polygons, and morphological descriptors (volume fraction, covariogram).

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::geometry::{polygon_distance, Aggregate, Microstructure, Point2};
use crate::rng::{stream, Purpose};

/// Placement stops once the fraction reaches the target; a polygon that would
/// push it more than this above the target is rejected.
pub const FRACTION_TOLERANCE: f64 = 0.01;

/// Volume fractions above this are refused: sequential placement jams long before.
pub const MAX_TARGET_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeFamily {
    /// Every aggregate a regular n-gon.
    Regular(usize),
    /// Side count drawn uniformly in `[min, max]`.
    Mixed { min: usize, max: usize },
}

impl ShapeFamily {
    pub const SQUARE: ShapeFamily = ShapeFamily::Regular(4);
    pub const MULTIFORM: ShapeFamily = ShapeFamily::Mixed { min: 3, max: 8 };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Circumradius {
    Fixed(f64),
    /// Drawn uniformly in `[min, max]`.
    Range {
        min: f64,
        max: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorphologyConfig {
    pub width: f64,
    pub height: f64,
    pub target_volume_fraction: f64,
    pub shape_family: ShapeFamily,
    pub circumradius: Circumradius,
    /// Minimum matrix gap between aggregates, and between aggregates and the domain edge.
    pub min_gap: f64,
    pub seed: u64,
    pub max_attempts: usize,
}

impl Default for MorphologyConfig {
    fn default() -> Self {
        MorphologyConfig {
            width: 0.600,
            height: 0.225,
            target_volume_fraction: 0.25,
            shape_family: ShapeFamily::SQUARE,
            circumradius: Circumradius::Fixed(0.015),
            min_gap: 0.002,
            seed: 0,
            max_attempts: 1_000_000,
        }
    }
}

impl MorphologyConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.width > 0.0 && self.height > 0.0) {
            return bad("domain dimensions must be positive".into());
        }
        let vf = self.target_volume_fraction;
        if !(0.0..1.0).contains(&vf) {
            return bad(format!("target volume fraction {vf} outside [0, 1)"));
        }
        if vf > MAX_TARGET_FRACTION {
            log::warn!("target volume fraction {vf} exceeds the practical jamming bound {MAX_TARGET_FRACTION}");
            return bad(format!(
                "target volume fraction {vf} above {MAX_TARGET_FRACTION}; sequential placement would jam"
            ));
        }
        match self.shape_family {
            ShapeFamily::Regular(n) if n < 3 => {
                return bad(format!("polygons need at least 3 sides, got {n}"))
            }
            ShapeFamily::Mixed { min, max } if min < 3 || max < min => {
                return bad(format!("invalid side-count range [{min}, {max}]"))
            }
            _ => {}
        }
        let (rmin, rmax) = match self.circumradius {
            Circumradius::Fixed(r) => (r, r),
            Circumradius::Range { min, max } => (min, max),
        };
        if !(rmin > 0.0 && rmax >= rmin && rmax.is_finite()) {
            return bad(format!("invalid circumradius range [{rmin}, {rmax}]"));
        }
        if 2.0 * (rmax + self.min_gap) > self.width.min(self.height) {
            return bad("aggregates do not fit in the domain".into());
        }
        if self.min_gap.is_nan() || self.min_gap < 0.0 {
            return bad("min_gap must be non-negative".into());
        }
        Ok(())
    }
}

/// Regular n-gon, counter-clockwise.
pub fn regular_polygon(
    id: usize,
    center: Point2,
    circumradius: f64,
    sides: usize,
    rotation: f64,
) -> Aggregate {
    let vertices = (0..sides)
        .map(|k| {
            let a = rotation + TAU * k as f64 / sides as f64;
            Point2::new(
                center.x + circumradius * a.cos(),
                center.y + circumradius * a.sin(),
            )
        })
        .collect();
    Aggregate { id, vertices }
}

/// Sequential random placement with a hard-core (minimum gap) rejection rule.
///
/// Each trial draws a side count, circumradius, center and orientation; it is
/// accepted when the polygon stays `min_gap` inside the domain and its
/// separating-axis gap to every accepted polygon is at least `min_gap`.
pub fn generate(config: &MorphologyConfig) -> Result<Microstructure> {
    config.validate()?;
    let domain = config.width * config.height;
    let target = config.target_volume_fraction;
    let mut rng = stream(config.seed, Purpose::Generate, 0);
    let mut accepted: Vec<(Aggregate, Point2, f64)> = Vec::new();
    let mut area = 0.0;
    let mut attempts = 0;
    let gap = config.min_gap;
    while area / domain < target {
        if attempts >= config.max_attempts {
            return Err(Error::PlacementExhausted {
                attempts,
                achieved: area / domain,
            });
        }
        attempts += 1;
        let sides = match config.shape_family {
            ShapeFamily::Regular(n) => n,
            ShapeFamily::Mixed { min, max } => rng.gen_range(min..=max),
        };
        let r = match config.circumradius {
            Circumradius::Fixed(r) => r,
            Circumradius::Range { min, max } if max > min => rng.gen_range(min..=max),
            Circumradius::Range { min, .. } => min,
        };
        let center = Point2::new(
            rng.gen_range(r + gap..=config.width - r - gap),
            rng.gen_range(r + gap..=config.height - r - gap),
        );
        let rotation = rng.gen_range(0.0..TAU / sides as f64);
        let poly = regular_polygon(accepted.len(), center, r, sides, rotation);
        let poly_area = poly.area();
        if (area + poly_area) / domain > target + FRACTION_TOLERANCE {
            continue;
        }
        let (lo, hi) = poly.bounds();
        if lo.x < gap || lo.y < gap || hi.x > config.width - gap || hi.y > config.height - gap {
            continue;
        }
        let clear = accepted.iter().all(|(other, c, rr)| {
            c.distance(center) >= r + rr + gap || polygon_distance(other, &poly) >= gap
        });
        if clear {
            area += poly_area;
            accepted.push((poly, center, r));
        }
    }
    Ok(Microstructure {
        width: config.width,
        height: config.height,
        aggregates: accepted.into_iter().map(|(a, _, _)| a).collect(),
    })
}

/// Aggregate area over domain area.
pub fn volume_fraction(m: &Microstructure) -> f64 {
    m.aggregates.iter().map(Aggregate::area).sum::<f64>() / m.domain_area()
}

/// Uniform grid over the domain for fast point-in-aggregate queries.
pub struct PhaseIndex<'a> {
    m: &'a Microstructure,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<usize>>,
}

impl<'a> PhaseIndex<'a> {
    pub fn new(m: &'a Microstructure) -> Self {
        let n = m.aggregates.len().max(1);
        let per_side = (n as f64).sqrt().ceil() as usize;
        let aspect = m.width / m.height;
        let nx = ((per_side as f64 * aspect.sqrt()).ceil() as usize).clamp(1, 512);
        let ny = ((per_side as f64 / aspect.sqrt()).ceil() as usize).clamp(1, 512);
        let mut cells = vec![Vec::new(); nx * ny];
        for (i, a) in m.aggregates.iter().enumerate() {
            let (lo, hi) = a.bounds();
            let (x0, y0) = Self::cell_of(m, nx, ny, lo);
            let (x1, y1) = Self::cell_of(m, nx, ny, hi);
            for cy in y0..=y1 {
                for cx in x0..=x1 {
                    cells[cy * nx + cx].push(i);
                }
            }
        }
        PhaseIndex { m, nx, ny, cells }
    }

    fn cell_of(m: &Microstructure, nx: usize, ny: usize, p: Point2) -> (usize, usize) {
        let cx = ((p.x / m.width) * nx as f64)
            .floor()
            .clamp(0.0, (nx - 1) as f64) as usize;
        let cy = ((p.y / m.height) * ny as f64)
            .floor()
            .clamp(0.0, (ny - 1) as f64) as usize;
        (cx, cy)
    }

    /// True if `p` lies in an aggregate (boundary included).
    pub fn in_aggregate(&self, p: Point2) -> bool {
        let (cx, cy) = Self::cell_of(self.m, self.nx, self.ny, p);
        self.cells[cy * self.nx + cx]
            .iter()
            .any(|&i| self.m.aggregates[i].contains(p))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariogramEstimate {
    pub lags: Vec<f64>,
    pub values: Vec<f64>,
    pub n_samples: usize,
}

impl CovariogramEstimate {
    /// Binomial standard error of the estimate at lag index `k`.
    pub fn standard_error(&self, k: usize) -> f64 {
        let p = self.values[k];
        (p * (1.0 - p) / self.n_samples as f64).sqrt()
    }
}

/// Monte Carlo isotropic covariogram `C(|h|) = P(x ∈ A, x + h ∈ A)`: `x`
/// uniform in the domain, `h` of length `lag` in a uniform direction, pairs
/// with `x + h` outside the domain redrawn. Each lag has its own random stream.
pub fn covariogram(
    m: &Microstructure,
    lags: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<CovariogramEstimate> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be positive".into()));
    }
    let diagonal = m.width.hypot(m.height);
    if let Some(&bad) = lags.iter().find(|&&h| !(0.0..diagonal).contains(&h)) {
        return Err(Error::InvalidArgument(format!(
            "lag {bad} outside [0, domain diagonal {diagonal})"
        )));
    }
    let index = PhaseIndex::new(m);
    let values = lags
        .par_iter()
        .enumerate()
        .map(|(k, &h)| {
            let mut rng = stream(seed, Purpose::Covariogram, k as u64);
            let mut hits = 0usize;
            let mut valid = 0usize;
            while valid < n_samples {
                let x = Point2::new(rng.gen_range(0.0..m.width), rng.gen_range(0.0..m.height));
                let phi = rng.gen_range(0.0..TAU);
                let y = Point2::new(x.x + h * phi.cos(), x.y + h * phi.sin());
                if !m.contains_point(y) {
                    continue;
                }
                valid += 1;
                if index.in_aggregate(x) && index.in_aggregate(y) {
                    hits += 1;
                }
            }
            hits as f64 / n_samples as f64
        })
        .collect();
    Ok(CovariogramEstimate {
        lags: lags.to_vec(),
        values,
        n_samples,
    })
}
