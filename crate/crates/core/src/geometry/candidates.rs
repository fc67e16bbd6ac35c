use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::f64::consts::FRAC_PI_2;

use super::visibility::{field_of_view, shadow_filter, Contact};
use super::{DiscretizationPoint, DiscretizedMicrostructure, Point2, UnitVector};
use crate::error::{Error, Result};

/// Whether the tip may follow its own aggregate (F1) or must cross the matrix (F2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Configuration {
    F1,
    F2,
}

/// Current crack tip: its position and, when it sits on one, the discretization point index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TipState {
    pub position: Point2,
    pub point: Option<usize>,
}

impl TipState {
    pub fn free(position: Point2) -> Self {
        TipState {
            position,
            point: None,
        }
    }

    pub fn at(dm: &DiscretizedMicrostructure, index: usize) -> Self {
        TipState {
            position: dm.points[index].position,
            point: Some(index),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub point: DiscretizationPoint,
    pub d: f64,
    pub theta: f64,
    pub d_norm: f64,
    pub theta_norm: f64,
    pub same_aggregate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub tip: Point2,
    pub direction: UnitVector,
    pub configuration: Configuration,
    pub candidates: Vec<Candidate>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    /// Position of the candidate with discretization index `index`.
    pub fn position_of(&self, index: usize) -> Option<usize> {
        self.candidates.iter().position(|c| c.point.index == index)
    }
}

/// Distance from the tip and absolute angle to the propagation direction.
pub fn indicators(tip: Point2, direction: UnitVector, y: Point2) -> Result<(f64, f64)> {
    let w = y - tip;
    let d = w.norm();
    if d == 0.0 {
        return Err(Error::Degenerate(
            "candidate coincides with the crack tip".into(),
        ));
    }
    let cos = (w.dot(direction.get()).abs() / d).min(1.0);
    Ok((d, cos.acos().min(FRAC_PI_2)))
}

/// Min-max normalization of raw `(d, theta)` pairs over one tip's candidate
/// set. A constant component maps to 0 for every candidate.
pub fn normalize(raw: &[(f64, f64)]) -> Result<Vec<(f64, f64)>> {
    if raw.is_empty() {
        return Err(Error::Empty(
            "cannot normalize an empty candidate list".into(),
        ));
    }
    let range = |f: fn(&(f64, f64)) -> f64| {
        raw.iter()
            .map(f)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            })
    };
    let (d_lo, d_hi) = range(|r| r.0);
    let (t_lo, t_hi) = range(|r| r.1);
    let scale = |v: f64, lo: f64, hi: f64| {
        if hi > lo {
            ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
        } else {
            0.0
        }
    };
    Ok(raw
        .iter()
        .map(|&(d, t)| (scale(d, d_lo, d_hi), scale(t, t_lo, t_hi)))
        .collect())
}

/// Field of view, shadow deletion, same-aggregate tagging, indicators and
/// normalization for one tip. `None` when no point is reachable.
///
/// Same-aggregate candidates are the surviving points on the side(s) of the
/// tip's own aggregate that pass through the tip.
pub fn build_candidate_set(
    tip: &TipState,
    direction: UnitVector,
    dm: &DiscretizedMicrostructure,
    visited: &HashSet<usize>,
) -> Option<CandidateSet> {
    let fov = field_of_view(tip.position, direction, dm, visited);
    let kept = shadow_filter(tip.position, &fov, dm);
    if kept.is_empty() {
        return None;
    }
    let contact = match tip.point {
        Some(i) => {
            let p = &dm.points[i];
            let mut sides = vec![p.side_id];
            sides.extend(p.shared_side);
            Some(Contact {
                aggregate: p.aggregate_id,
                sides,
            })
        }
        None => Contact::find(dm, tip.position),
    };
    let same = |p: &DiscretizationPoint| {
        contact
            .as_ref()
            .is_some_and(|c| p.aggregate_id == c.aggregate && c.sides.iter().any(|&s| p.on_side(s)))
    };
    let raw: Vec<(f64, f64)> = kept
        .iter()
        .map(|p| {
            indicators(tip.position, direction, p.position)
                .expect("tip excluded from field of view")
        })
        .collect();
    let normed = normalize(&raw).expect("non-empty");
    let candidates: Vec<Candidate> = kept
        .iter()
        .zip(raw.iter().zip(&normed))
        .map(|(p, (&(d, theta), &(d_norm, theta_norm)))| Candidate {
            point: **p,
            d,
            theta,
            d_norm,
            theta_norm,
            same_aggregate: same(p),
        })
        .collect();
    let configuration = if candidates.iter().any(|c| c.same_aggregate) {
        Configuration::F1
    } else {
        Configuration::F2
    };
    Some(CandidateSet {
        tip: tip.position,
        direction,
        configuration,
        candidates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{discretize, Aggregate, Microstructure};
    use std::f64::consts::PI;

    #[test]
    fn indicator_examples() {
        let o = Point2::new(0.0, 0.0);
        let u = UnitVector::PLUS_X;
        assert_eq!(indicators(o, u, Point2::new(1.0, 0.0)).unwrap(), (1.0, 0.0));
        let (d, t) = indicators(o, u, Point2::new(0.0, 1.0)).unwrap();
        assert_eq!(d, 1.0);
        assert!((t - PI / 2.0).abs() < 1e-15);
        let (d, t) = indicators(o, u, Point2::new(3.0, 4.0)).unwrap();
        assert!((d - 5.0).abs() < 1e-15);
        assert!((t - (0.6f64).acos()).abs() < 1e-15);
        assert!(indicators(o, u, o).is_err());
    }

    #[test]
    fn normalize_examples() {
        let n = normalize(&[(1.0, 0.1), (2.0, 0.1), (3.0, 0.1)]).unwrap();
        assert_eq!(n, vec![(0.0, 0.0), (0.5, 0.0), (1.0, 0.0)]);
        assert_eq!(normalize(&[(0.7, 0.3)]).unwrap(), vec![(0.0, 0.0)]);
        assert!(normalize(&[]).is_err());
    }

    fn two_squares() -> DiscretizedMicrostructure {
        let sq = |id, x0: f64, y0: f64| {
            Aggregate::new(
                id,
                vec![
                    Point2::new(x0, y0),
                    Point2::new(x0 + 1.0, y0),
                    Point2::new(x0 + 1.0, y0 + 1.0),
                    Point2::new(x0, y0 + 1.0),
                ],
            )
            .unwrap()
        };
        let m = Microstructure::new(6.0, 4.0, vec![sq(0, 1.0, 1.0), sq(1, 3.0, 2.5)]).unwrap();
        discretize(&m, 5).unwrap()
    }

    #[test]
    fn empty_microstructure_has_no_candidates() {
        let dm = discretize(&Microstructure::empty(1.0, 1.0), 5).unwrap();
        let tip = TipState::free(Point2::new(0.0, 0.5));
        assert!(build_candidate_set(&tip, UnitVector::PLUS_X, &dm, &HashSet::new()).is_none());
    }

    #[test]
    fn mid_side_tip_is_f1() {
        let dm = two_squares();
        // Bottom side of square 0, slot 1.
        let idx = dm
            .points
            .iter()
            .find(|p| p.aggregate_id == 0 && p.side_id == 0 && p.side_slot == 1)
            .unwrap()
            .index;
        let cs = build_candidate_set(
            &TipState::at(&dm, idx),
            UnitVector::PLUS_X,
            &dm,
            &HashSet::from([idx]),
        )
        .unwrap();
        assert_eq!(cs.configuration, Configuration::F1);
        assert!(cs
            .candidates
            .iter()
            .filter(|c| c.same_aggregate)
            .all(|c| c.point.on_side(0)));
        assert!(cs
            .candidates
            .iter()
            .all(|c| (0.0..=1.0).contains(&c.d_norm) && (0.0..=1.0).contains(&c.theta_norm)));
    }

    #[test]
    fn trailing_corner_is_f2() {
        let dm = two_squares();
        // Bottom-right corner of square 0 after walking its bottom and right sides.
        let corner = dm
            .points
            .iter()
            .find(|p| p.aggregate_id == 0 && p.side_id == 1 && p.side_slot == 0)
            .unwrap()
            .index;
        let visited: HashSet<usize> = dm
            .aggregate_points(0)
            .iter()
            .filter(|p| p.on_side(0) || p.on_side(1))
            .map(|p| p.index)
            .collect();
        let cs = build_candidate_set(
            &TipState::at(&dm, corner),
            UnitVector::PLUS_X,
            &dm,
            &visited,
        )
        .unwrap();
        assert_eq!(cs.configuration, Configuration::F2);
        assert!(cs.candidates.iter().all(|c| c.point.aggregate_id == 1));
    }
}
