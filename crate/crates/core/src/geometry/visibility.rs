//! Field of view and shadow-cone deletion of hidden discretization points.

use std::collections::HashSet;

use super::{
    Aggregate, DiscretizationPoint, DiscretizedMicrostructure, Point2, UnitVector, DET_EPS,
};

/// Aggregate whose boundary carries the crack tip, and the sides through it
/// (two when the tip is a corner).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contact {
    pub aggregate: usize,
    pub sides: Vec<usize>,
}

impl Contact {
    pub fn find(dm: &DiscretizedMicrostructure, tip: Point2) -> Option<Contact> {
        dm.source.aggregates.iter().enumerate().find_map(|(i, a)| {
            contact_with(a, tip).map(|sides| Contact {
                aggregate: i,
                sides,
            })
        })
    }
}

fn contact_with(a: &Aggregate, tip: Point2) -> Option<Vec<usize>> {
    let (lo, hi) = a.bounds();
    let slack = 1e-9;
    if tip.x < lo.x - slack || tip.x > hi.x + slack || tip.y < lo.y - slack || tip.y > hi.y + slack
    {
        return None;
    }
    let sides = a.sides_containing(tip);
    (!sides.is_empty()).then_some(sides)
}

/// Unvisited discretization points `y ≠ tip` with `⟨tip→y, direction⟩ ≥ 0`.
pub fn field_of_view<'a>(
    tip: Point2,
    direction: UnitVector,
    dm: &'a DiscretizedMicrostructure,
    visited: &HashSet<usize>,
) -> Vec<&'a DiscretizationPoint> {
    let u = direction.get();
    dm.points
        .iter()
        .filter(|p| {
            !visited.contains(&p.index) && p.position != tip && (p.position - tip).dot(u) >= 0.0
        })
        .collect()
}

/// Region of the plane an aggregate hides from the tip.
enum Shadow {
    /// Tip on the aggregate boundary: hidden iff strictly left of every side
    /// through the tip, i.e. the segment enters the interior immediately.
    Contact { edges: Vec<Point2> },
    /// Tip outside: the cone spanned by the extreme points `y1`, `y2`, cut by the chord between them.
    Cone {
        v1: Point2,
        v2: Point2,
        y1: Point2,
        chord: Point2,
        tip_side: f64,
        /// Part of the aggregate lies strictly between the tip and the chord,
        /// so points on the chord itself are hidden too.
        body_before_chord: bool,
    },
}

impl Shadow {
    fn build(dm: &DiscretizedMicrostructure, aggregate: usize, tip: Point2) -> Option<Shadow> {
        let agg = &dm.source.aggregates[aggregate];
        if let Some(sides) = contact_with(agg, tip) {
            return Some(Shadow::Contact {
                edges: sides.iter().map(|&k| agg.edge(k)).collect(),
            });
        }
        // Extreme rays: with the tip outside a convex polygon the angular
        // extent is below π, so the pair maximizing the angle is the
        // (min, max) of the signed angle about the direction to the centroid.
        let reference = agg.centroid() - tip;
        let mut lo = (f64::INFINITY, Point2::default());
        let mut hi = (f64::NEG_INFINITY, Point2::default());
        for p in dm.aggregate_points(aggregate) {
            let w = p.position - tip;
            let angle = reference.cross(w).atan2(reference.dot(w));
            if angle < lo.0 {
                lo = (angle, p.position);
            }
            if angle > hi.0 {
                hi = (angle, p.position);
            }
        }
        if !lo.0.is_finite() {
            return None;
        }
        let (y1, y2) = (lo.1, hi.1);
        let chord = y2 - y1;
        let tip_side = chord.cross(tip - y1);
        if tip_side.abs() <= DET_EPS {
            return None;
        }
        let body_before_chord = agg.vertices.iter().any(|&v| {
            let s = chord.cross(v - y1);
            s.abs() > DET_EPS && s.signum() == tip_side.signum()
        });
        Some(Shadow::Cone {
            v1: y1 - tip,
            v2: y2 - tip,
            y1,
            chord,
            tip_side,
            body_before_chord,
        })
    }

    fn hides(&self, tip: Point2, z: Point2) -> bool {
        let w = z - tip;
        match self {
            Shadow::Contact { edges } => edges.iter().all(|e| e.cross(w) > DET_EPS),
            Shadow::Cone {
                v1,
                v2,
                y1,
                chord,
                tip_side,
                body_before_chord,
            } => {
                let a = v1.cross(w);
                let b = v2.cross(w);
                let in_cone = (a > DET_EPS && b < -DET_EPS) || (a < -DET_EPS && b > DET_EPS);
                if !in_cone {
                    return false;
                }
                let side = chord.cross(z - *y1);
                if side.abs() <= DET_EPS {
                    *body_before_chord
                } else {
                    side.signum() != tip_side.signum()
                }
            }
        }
    }
}

/// Deletes every point of `fov` hidden behind some aggregate.
///
/// For an aggregate not touching the tip, the two discretization points that
/// span the widest angle at the tip bound a cone; a point strictly inside the
/// cone and strictly beyond the chord joining the two extremes is deleted, as is
/// a point on the chord when the aggregate bulges towards the tip. For
/// the aggregate carrying the tip, points are deleted when the segment from the
/// tip enters its interior at once; points on the sides through the tip survive.
/// Near-zero determinants (within [`DET_EPS`]) resolve to "kept".
pub fn shadow_filter<'a>(
    tip: Point2,
    fov: &[&'a DiscretizationPoint],
    dm: &DiscretizedMicrostructure,
) -> Vec<&'a DiscretizationPoint> {
    let shadows: Vec<Shadow> = (0..dm.source.aggregates.len())
        .filter_map(|a| Shadow::build(dm, a, tip))
        .collect();
    fov.iter()
        .copied()
        .filter(|p| !shadows.iter().any(|s| s.hides(tip, p.position)))
        .collect()
}
