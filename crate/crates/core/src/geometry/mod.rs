//! Planar geometry of the two-phase microstructure: aggregates, their boundary
//! discretization, and the candidate points reachable from a crack tip.

mod candidates;
mod discretize;
mod visibility;

pub use candidates::{
    build_candidate_set, indicators, normalize, Candidate, CandidateSet, Configuration, TipState,
};
pub use discretize::{
    discretize, DiscretizationPoint, DiscretizedMicrostructure, DEFAULT_POINTS_PER_SIDE,
};
pub use visibility::{field_of_view, shadow_filter, Contact};

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};

/// Absolute tolerance on determinant sign tests (m²). Values within the band count as zero.
pub const DET_EPS: f64 = 1e-12;

/// Point or vector in the plane, in meters. Serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl From<[f64; 2]> for Point2 {
    fn from([x, y]: [f64; 2]) -> Self {
        Point2 { x, y }
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the cross product, `det(self, other)`.
    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point2) -> f64 {
        (other - self).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Rotation about the origin by `angle` radians.
    pub fn rotated(self, angle: f64) -> Point2 {
        let (s, c) = angle.sin_cos();
        Point2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn lerp(self, other: Point2, t: f64) -> Point2 {
        Point2::new(
            self.x + t * (other.x - self.x),
            self.y + t * (other.y - self.y),
        )
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, rhs: f64) -> Point2 {
        Point2::new(self.x * rhs, self.y * rhs)
    }
}

/// Unit vector giving the local crack propagation direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct UnitVector(Point2);

impl UnitVector {
    /// Propagation along +x, orthogonal to a vertical loading direction.
    pub const PLUS_X: UnitVector = UnitVector(Point2::new(1.0, 0.0));

    /// Normalizes `v`; fails on zero or non-finite input.
    pub fn new(v: Point2) -> Result<Self> {
        let n = v.norm();
        if !n.is_finite() || n == 0.0 {
            return Err(Error::InvalidArgument(format!(
                "direction ({}, {}) cannot be normalized",
                v.x, v.y
            )));
        }
        Ok(UnitVector(Point2::new(v.x / n, v.y / n)))
    }

    pub fn get(self) -> Point2 {
        self.0
    }
}

impl TryFrom<[f64; 2]> for UnitVector {
    type Error = Error;
    fn try_from(v: [f64; 2]) -> Result<Self> {
        UnitVector::new(v.into())
    }
}

impl From<UnitVector> for [f64; 2] {
    fn from(u: UnitVector) -> Self {
        u.0.into()
    }
}

/// Convex polygonal aggregate with counter-clockwise vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub id: usize,
    pub vertices: Vec<Point2>,
}

impl Aggregate {
    /// Builds an aggregate and checks it is a non-degenerate convex CCW polygon.
    pub fn new(id: usize, vertices: Vec<Point2>) -> Result<Self> {
        let a = Aggregate { id, vertices };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| Error::InvalidPolygon {
            id: self.id,
            reason,
        };
        let n = self.vertices.len();
        if n < 3 {
            return Err(fail(format!("{n} vertices, need at least 3")));
        }
        if let Some(p) = self.vertices.iter().find(|p| !p.is_finite()) {
            return Err(fail(format!("non-finite vertex ({}, {})", p.x, p.y)));
        }
        if self.area() <= 0.0 {
            return Err(fail(
                "non-positive signed area (vertices must be counter-clockwise)".into(),
            ));
        }
        for k in 0..n {
            let e0 = self.edge(k);
            if e0.norm() == 0.0 {
                return Err(fail(format!("repeated vertex {k}")));
            }
            let e1 = self.edge((k + 1) % n);
            if e0.cross(e1) <= DET_EPS * 1e-3 {
                return Err(fail(format!(
                    "not strictly convex at vertex {}",
                    (k + 1) % n
                )));
            }
        }
        // Convex turns everywhere plus total turning of 2π rules out self-intersection.
        let turning: f64 = (0..n)
            .map(|k| {
                let e0 = self.edge(k);
                let e1 = self.edge((k + 1) % n);
                e0.cross(e1).atan2(e0.dot(e1))
            })
            .sum();
        if (turning - std::f64::consts::TAU).abs() > 1e-6 {
            return Err(fail("self-intersecting boundary".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Edge vector of side `k`, from vertex `k` to vertex `k + 1`.
    pub fn edge(&self, k: usize) -> Point2 {
        let n = self.vertices.len();
        self.vertices[(k + 1) % n] - self.vertices[k]
    }

    /// Shoelace signed area; positive for CCW order.
    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        0.5 * (0..n)
            .map(|k| self.vertices[k].cross(self.vertices[(k + 1) % n]))
            .sum::<f64>()
    }

    pub fn centroid(&self) -> Point2 {
        let n = self.vertices.len() as f64;
        let s = self
            .vertices
            .iter()
            .fold(Point2::default(), |acc, &p| acc + p);
        s * (1.0 / n)
    }

    /// Closed containment (boundary counts as inside).
    pub fn contains(&self, p: Point2) -> bool {
        (0..self.len()).all(|k| self.edge(k).cross(p - self.vertices[k]) >= 0.0)
    }

    /// Strict interior containment with the determinant tolerance.
    pub fn contains_strictly(&self, p: Point2) -> bool {
        (0..self.len()).all(|k| self.edge(k).cross(p - self.vertices[k]) > DET_EPS)
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounds(&self) -> (Point2, Point2) {
        self.vertices.iter().fold(
            (
                Point2::new(f64::INFINITY, f64::INFINITY),
                Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
            ),
            |(lo, hi), p| {
                (
                    Point2::new(lo.x.min(p.x), lo.y.min(p.y)),
                    Point2::new(hi.x.max(p.x), hi.y.max(p.y)),
                )
            },
        )
    }

    /// Sides whose closed segment contains `p` within the determinant tolerance.
    pub fn sides_containing(&self, p: Point2) -> Vec<usize> {
        (0..self.len())
            .filter(|&k| {
                let a = self.vertices[k];
                let e = self.edge(k);
                let w = p - a;
                let t = w.dot(e) / e.dot(e);
                e.cross(w).abs() <= DET_EPS && (-1e-12..=1.0 + 1e-12).contains(&t)
            })
            .collect()
    }
}

/// Separating-axis gap between two convex polygons: the largest separation
/// of their projections over all edge normals. Positive means disjoint; it is
/// a lower bound on the Euclidean distance between them.
pub fn separation(a: &Aggregate, b: &Aggregate) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for (p, q) in [(a, b), (b, a)] {
        for k in 0..p.len() {
            let e = p.edge(k);
            let normal = Point2::new(e.y, -e.x) * (1.0 / e.norm());
            let (p_lo, p_hi) = project(p, normal);
            let (q_lo, q_hi) = project(q, normal);
            best = best.max((q_lo - p_hi).max(p_lo - q_hi));
        }
    }
    best
}

/// Euclidean distance between two convex polygons, 0 when they touch or overlap.
pub fn polygon_distance(a: &Aggregate, b: &Aggregate) -> f64 {
    if separation(a, b) <= 0.0 {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for (p, q) in [(a, b), (b, a)] {
        for k in 0..q.len() {
            let (s0, s1) = (q.vertices[k], q.vertices[(k + 1) % q.len()]);
            for &v in &p.vertices {
                best = best.min(point_segment_distance(v, s0, s1));
            }
        }
    }
    best
}

fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(ab) / ab.dot(ab)).clamp(0.0, 1.0);
    p.distance(a + ab * t)
}

fn project(a: &Aggregate, axis: Point2) -> (f64, f64) {
    a.vertices
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            let s = v.dot(axis);
            (lo.min(s), hi.max(s))
        })
}

/// Rectangular domain `[0, width] × [0, height]` holding convex aggregates.
/// `width` runs along the crack propagation direction and `height` along the load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Microstructure {
    pub width: f64,
    pub height: f64,
    pub aggregates: Vec<Aggregate>,
}

impl Microstructure {
    pub fn new(width: f64, height: f64, aggregates: Vec<Aggregate>) -> Result<Self> {
        let m = Microstructure {
            width,
            height,
            aggregates,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn empty(width: f64, height: f64) -> Self {
        Microstructure {
            width,
            height,
            aggregates: Vec::new(),
        }
    }

    /// Checks domain size, every polygon, containment in the rectangle and pairwise disjointness.
    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0
            && self.height > 0.0
            && self.width.is_finite()
            && self.height.is_finite())
        {
            return Err(Error::InvalidMicrostructure(format!(
                "domain {} x {} must be positive and finite",
                self.width, self.height
            )));
        }
        for a in &self.aggregates {
            a.validate()?;
            let (lo, hi) = a.bounds();
            if lo.x < 0.0 || lo.y < 0.0 || hi.x > self.width || hi.y > self.height {
                return Err(Error::InvalidMicrostructure(format!(
                    "aggregate {} leaves the domain",
                    a.id
                )));
            }
        }
        for (i, a) in self.aggregates.iter().enumerate() {
            for b in &self.aggregates[i + 1..] {
                if separation(a, b) < 0.0 {
                    return Err(Error::InvalidMicrostructure(format!(
                        "aggregates {} and {} overlap",
                        a.id, b.id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn domain_area(&self) -> f64 {
        self.width * self.height
    }

    pub fn contains_point(&self, p: Point2) -> bool {
        (0.0..=self.width).contains(&p.x) && (0.0..=self.height).contains(&p.y)
    }

    /// Index of an aggregate whose strict interior holds `p`.
    pub fn aggregate_strictly_containing(&self, p: Point2) -> Option<usize> {
        self.aggregates.iter().position(|a| a.contains_strictly(p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn square(id: usize, x0: f64, y0: f64, side: f64) -> Aggregate {
        Aggregate::new(
            id,
            vec![
                Point2::new(x0, y0),
                Point2::new(x0 + side, y0),
                Point2::new(x0 + side, y0 + side),
                Point2::new(x0, y0 + side),
            ],
        )
        .unwrap()
    }

    #[test]
    fn rejects_clockwise_and_nonconvex() {
        let cw = vec![
            Point2::new(0.0, 0.0),
            Point2::new(0.0, 1.0),
            Point2::new(1.0, 1.0),
            Point2::new(1.0, 0.0),
        ];
        assert!(Aggregate::new(0, cw).is_err());
        let dart = vec![
            Point2::new(0.0, 0.0),
            Point2::new(2.0, 0.0),
            Point2::new(1.0, 0.5),
            Point2::new(1.0, 2.0),
        ];
        assert!(matches!(
            Aggregate::new(1, dart),
            Err(Error::InvalidPolygon { id: 1, .. })
        ));
        assert!(Aggregate::new(2, vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0)]).is_err());
        let collinear = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(2.0, 0.0),
        ];
        assert!(Aggregate::new(3, collinear).is_err());
    }

    #[test]
    fn square_area_and_containment() {
        let s = square(0, 0.0, 0.0, 1.0);
        assert_eq!(s.area(), 1.0);
        assert!(s.contains_strictly(Point2::new(0.5, 0.5)));
        assert!(!s.contains_strictly(Point2::new(0.0, 0.5)));
        assert!(s.contains(Point2::new(0.0, 0.5)));
        assert_eq!(s.sides_containing(Point2::new(0.0, 0.0)), vec![0, 3]);
        assert_eq!(s.sides_containing(Point2::new(0.5, 1.0)), vec![2]);
    }

    #[test]
    fn separation_sign() {
        let a = square(0, 0.0, 0.0, 1.0);
        let b = square(1, 1.5, 0.0, 1.0);
        assert!((separation(&a, &b) - 0.5).abs() < 1e-15);
        let c = square(2, 0.5, 0.5, 1.0);
        assert!(separation(&a, &c) < 0.0);
    }

    #[test]
    fn microstructure_rejects_overlap_and_escape() {
        let a = square(0, 0.1, 0.1, 0.3);
        let b = square(1, 0.2, 0.2, 0.3);
        assert!(Microstructure::new(1.0, 1.0, vec![a.clone(), b]).is_err());
        let c = square(2, 0.9, 0.1, 0.3);
        assert!(Microstructure::new(1.0, 1.0, vec![a, c]).is_err());
    }

    #[test]
    fn point_serializes_as_pair() {
        let s = serde_json::to_string(&Point2::new(0.25, -1.5)).unwrap();
        assert_eq!(s, "[0.25,-1.5]");
        let u: UnitVector = serde_json::from_str("[3.0,4.0]").unwrap();
        assert_eq!(u.get(), Point2::new(0.6, 0.8));
        assert!(serde_json::from_str::<UnitVector>("[0.0,0.0]").is_err());
    }
}
