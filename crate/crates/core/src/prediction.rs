//! Crack path simulation with the Markov transition kernel.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::geometry::{
    build_candidate_set, CandidateSet, DiscretizedMicrostructure, Point2, TipState, UnitVector,
};
use crate::model::{transition_probabilities, ModelParams};
use crate::rng::{derive_seed, from_seed, Purpose};

/// How a simulated crack ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Tip reached the far boundary.
    Boundary,
    /// No reachable point remained; the tip was extended straight to the boundary.
    Projection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrackPath {
    pub points: Vec<Point2>,
    pub seed: u64,
    pub steps: usize,
    pub termination: Termination,
}

impl CrackPath {
    pub fn start(&self) -> Point2 {
        self.points[0]
    }

    /// A path given only by its vertices (analysis inputs, tests).
    pub fn from_points(points: Vec<Point2>) -> Self {
        CrackPath {
            steps: points.len().saturating_sub(1),
            points,
            seed: 0,
            termination: Termination::Boundary,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub microstructure_id: String,
    pub master_seed: u64,
    pub paths: Vec<CrackPath>,
}

/// Seed of ensemble member `index`; member seeds depend only on the master seed and the index.
pub fn path_seed(master_seed: u64, index: usize) -> u64 {
    derive_seed(
        derive_seed(master_seed, Purpose::Crack as u64),
        index as u64,
    )
}

/// Inverse-CDF draw from a discrete law given by `probs`.
pub fn draw_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    // Rounding left the total slightly below 1: take the last non-zero entry.
    probs
        .iter()
        .rposition(|&p| p > 0.0)
        .unwrap_or(probs.len() - 1)
}

/// One transition: candidate set, probabilities, weighted draw. Returns the
/// chosen discretization index and the candidate set it was drawn from, or
/// `None` when nothing is reachable.
pub fn local_step<R: Rng + ?Sized>(
    tip: &TipState,
    direction: UnitVector,
    dm: &DiscretizedMicrostructure,
    visited: &HashSet<usize>,
    params: &ModelParams,
    rng: &mut R,
) -> Option<(usize, CandidateSet)> {
    let cs = build_candidate_set(tip, direction, dm, visited)?;
    let probs = transition_probabilities(&cs, params).expect("candidate set is non-empty");
    let k = draw_index(&probs, rng);
    Some((cs.candidates[k].point.index, cs))
}

/// Point where the ray from `p` along `u` leaves the domain rectangle.
pub fn project_to_boundary(p: Point2, u: UnitVector, width: f64, height: f64) -> Point2 {
    let u = u.get();
    let mut t = f64::INFINITY;
    if u.x > 0.0 {
        t = t.min((width - p.x) / u.x);
    } else if u.x < 0.0 {
        t = t.min(-p.x / u.x);
    }
    if u.y > 0.0 {
        t = t.min((height - p.y) / u.y);
    } else if u.y < 0.0 {
        t = t.min(-p.y / u.y);
    }
    let t = t.max(0.0);
    Point2::new(p.x + t * u.x, p.y + t * u.y)
}

/// Default start point: middle of the left boundary.
pub fn default_start(dm: &DiscretizedMicrostructure) -> Point2 {
    Point2::new(0.0, dm.source.height / 2.0)
}

/// Runs the chain from `start` until the tip reaches `x ≥ width` or no point is
/// reachable (then the tip is projected along `direction` to the boundary).
/// At most `10·|points|` transitions are allowed.
pub fn simulate_crack(
    dm: &DiscretizedMicrostructure,
    start: Point2,
    direction: UnitVector,
    params: &ModelParams,
    seed: u64,
) -> Result<CrackPath> {
    let m = &dm.source;
    if !m.contains_point(start) {
        return Err(Error::InvalidArgument(format!(
            "start ({}, {}) outside the domain",
            start.x, start.y
        )));
    }
    if let Some(a) = m.aggregate_strictly_containing(start) {
        return Err(Error::InvalidArgument(format!(
            "start ({}, {}) inside aggregate {}",
            start.x, start.y, m.aggregates[a].id
        )));
    }
    let max_steps = 10 * dm.len();
    let mut rng = from_seed(seed);
    let mut tip = match dm.locate(start, 0.0) {
        Some(i) => TipState::at(dm, i),
        None => TipState::free(start),
    };
    let mut visited: HashSet<usize> = tip.point.into_iter().collect();
    let mut path = CrackPath {
        points: vec![start],
        seed,
        steps: 0,
        termination: Termination::Boundary,
    };
    loop {
        if tip.position.x >= m.width {
            path.termination = Termination::Boundary;
            return Ok(path);
        }
        let Some((next, _)) = local_step(&tip, direction, dm, &visited, params, &mut rng) else {
            let end = project_to_boundary(tip.position, direction, m.width, m.height);
            if end != tip.position {
                path.points.push(end);
            }
            path.termination = Termination::Projection;
            return Ok(path);
        };
        if path.steps == max_steps {
            return Err(Error::StepLimit {
                max_steps,
                partial: Box::new(path),
            });
        }
        visited.insert(next);
        tip = TipState::at(dm, next);
        path.points.push(tip.position);
        path.steps += 1;
    }
}

/// `count` independent cracks, member `k` seeded with [`path_seed`]`(master_seed, k)`.
pub fn ensemble(
    dm: &DiscretizedMicrostructure,
    microstructure_id: &str,
    start: Point2,
    direction: UnitVector,
    params: &ModelParams,
    count: usize,
    master_seed: u64,
) -> Result<Ensemble> {
    if count == 0 {
        return Err(Error::InvalidArgument(
            "ensemble size must be at least 1".into(),
        ));
    }
    let paths = (0..count)
        .into_par_iter()
        .map(|k| simulate_crack(dm, start, direction, params, path_seed(master_seed, k)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Ensemble {
        microstructure_id: microstructure_id.to_string(),
        master_seed,
        paths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{discretize, Microstructure};
    use crate::rng::from_seed;

    #[test]
    fn draw_is_inverse_cdf() {
        let mut rng = from_seed(1);
        assert_eq!(draw_index(&[1.0], &mut rng), 0);
        let mut counts = [0usize; 2];
        for _ in 0..10_000 {
            counts[draw_index(&[0.5, 0.5], &mut rng)] += 1;
        }
        // 3σ of Binomial(10⁴, 0.5) is 150.
        assert!((counts[0] as i64 - 5000).abs() <= 150, "{counts:?}");
    }

    #[test]
    fn empty_microstructure_gives_straight_crack() {
        let dm = discretize(&Microstructure::empty(0.6, 0.225), 5).unwrap();
        let p = simulate_crack(
            &dm,
            default_start(&dm),
            UnitVector::PLUS_X,
            &ModelParams::default(),
            3,
        )
        .unwrap();
        assert_eq!(
            p.points,
            vec![Point2::new(0.0, 0.1125), Point2::new(0.6, 0.1125)]
        );
        assert_eq!(p.termination, Termination::Projection);
        assert_eq!(p.steps, 0);
    }

    #[test]
    fn rejects_start_outside() {
        let dm = discretize(&Microstructure::empty(1.0, 1.0), 5).unwrap();
        assert!(simulate_crack(
            &dm,
            Point2::new(-0.1, 0.5),
            UnitVector::PLUS_X,
            &ModelParams::default(),
            0
        )
        .is_err());
    }

    #[test]
    fn projection_hits_nearest_wall() {
        let u = UnitVector::new(Point2::new(1.0, 1.0)).unwrap();
        let e = project_to_boundary(Point2::new(0.0, 0.5), u, 2.0, 1.0);
        assert!((e.x - 0.5).abs() < 1e-15 && (e.y - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ensemble_rejects_zero() {
        let dm = discretize(&Microstructure::empty(1.0, 1.0), 5).unwrap();
        assert!(ensemble(
            &dm,
            "m",
            default_start(&dm),
            UnitVector::PLUS_X,
            &ModelParams::default(),
            0,
            1
        )
        .is_err());
    }
}
