use serde::{Deserialize, Serialize};
use std::ops::Range;

use super::{Microstructure, Point2};
use crate::error::{Error, Result};

/// Points per aggregate side, endpoints included.
pub const DEFAULT_POINTS_PER_SIDE: usize = 5;

/// One point of the boundary discretization.
///
/// Side `k` runs from vertex `k` to vertex `k + 1`; slot `s` sits at fraction
/// `s / (P - 1)` along it. A corner is stored once, as slot 0 of the side it
/// starts, with `shared_side` naming the side it ends (where it is slot `P - 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationPoint {
    pub index: usize,
    pub position: Point2,
    /// Index of the aggregate in `Microstructure::aggregates`.
    pub aggregate_id: usize,
    pub side_id: usize,
    pub side_slot: usize,
    pub shared_side: Option<usize>,
}

impl DiscretizationPoint {
    pub fn is_corner(&self) -> bool {
        self.shared_side.is_some()
    }

    /// True if the point lies on side `side` of its aggregate.
    pub fn on_side(&self, side: usize) -> bool {
        self.side_id == side || self.shared_side == Some(side)
    }
}

/// The microstructure together with its boundary point set.
#[derive(Debug, Clone)]
pub struct DiscretizedMicrostructure {
    pub source: Microstructure,
    pub points: Vec<DiscretizationPoint>,
    pub points_per_side: usize,
    ranges: Vec<Range<usize>>,
}

impl DiscretizedMicrostructure {
    /// Points of aggregate `aggregate`, contiguous in `points`.
    pub fn aggregate_points(&self, aggregate: usize) -> &[DiscretizationPoint] {
        &self.points[self.ranges[aggregate].clone()]
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of the discretization point at `p`, matched within `tol` meters.
    pub fn locate(&self, p: Point2, tol: f64) -> Option<usize> {
        self.points
            .iter()
            .find(|q| q.position.distance(p) <= tol)
            .map(|q| q.index)
    }
}

/// Places `points_per_side` equally spaced points on every side, endpoints
/// included, merging shared corners: a convex n-gon yields `n·(P − 1)` points.
pub fn discretize(m: &Microstructure, points_per_side: usize) -> Result<DiscretizedMicrostructure> {
    if points_per_side < 2 {
        return Err(Error::InvalidArgument(format!(
            "points_per_side must be at least 2, got {points_per_side}"
        )));
    }
    m.validate()?;
    let step = (points_per_side - 1) as f64;
    let mut points = Vec::new();
    let mut ranges = Vec::with_capacity(m.aggregates.len());
    for (a_idx, agg) in m.aggregates.iter().enumerate() {
        let start = points.len();
        let n = agg.len();
        for side in 0..n {
            let from = agg.vertices[side];
            let to = agg.vertices[(side + 1) % n];
            for slot in 0..points_per_side - 1 {
                let position = if slot == 0 {
                    from
                } else {
                    from.lerp(to, slot as f64 / step)
                };
                points.push(DiscretizationPoint {
                    index: points.len(),
                    position,
                    aggregate_id: a_idx,
                    side_id: side,
                    side_slot: slot,
                    shared_side: (slot == 0).then_some((side + n - 1) % n),
                });
            }
        }
        ranges.push(start..points.len());
    }
    Ok(DiscretizedMicrostructure {
        source: m.clone(),
        points,
        points_per_side,
        ranges,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Aggregate;

    fn unit_square_ms() -> Microstructure {
        let sq = Aggregate::new(
            0,
            vec![
                Point2::new(1.0, 1.0),
                Point2::new(2.0, 1.0),
                Point2::new(2.0, 2.0),
                Point2::new(1.0, 2.0),
            ],
        )
        .unwrap();
        Microstructure::new(3.0, 3.0, vec![sq]).unwrap()
    }

    #[test]
    fn unit_square_counts() {
        let m = unit_square_ms();
        assert_eq!(discretize(&m, 5).unwrap().len(), 16);
        let corners = discretize(&m, 2).unwrap();
        assert_eq!(corners.len(), 4);
        assert!(corners.points.iter().all(|p| p.is_corner()));
    }

    #[test]
    fn triangle_midpoint() {
        let tri = Aggregate::new(
            0,
            vec![
                Point2::new(0.0, 0.0),
                Point2::new(1.0, 0.0),
                Point2::new(0.0, 1.0),
            ],
        )
        .unwrap();
        let m = Microstructure::new(1.0, 1.0, vec![tri]).unwrap();
        let dm = discretize(&m, 3).unwrap();
        assert_eq!(dm.len(), 6);
        let mid = dm
            .points
            .iter()
            .find(|p| p.side_id == 1 && p.side_slot == 1)
            .unwrap();
        assert_eq!(mid.position, Point2::new(0.5, 0.5));
    }

    #[test]
    fn rejects_small_p() {
        assert!(matches!(
            discretize(&unit_square_ms(), 1),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn corners_carry_both_sides() {
        let dm = discretize(&unit_square_ms(), 5).unwrap();
        let c = dm.points[0];
        assert!(c.on_side(0) && c.on_side(3));
        assert_eq!(c.position, Point2::new(1.0, 1.0));
        for p in &dm.points {
            let agg = &dm.source.aggregates[p.aggregate_id];
            assert!(agg.sides_containing(p.position).contains(&p.side_id));
        }
    }
}
