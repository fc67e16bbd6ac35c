//! Discrete Fréchet distance between vertex sequences.
//!
//! Couplings walk both sequences monotonically from first to last vertex with
//! steps (1,0), (0,1) or (1,1); the distance is the smallest achievable maximum
//! pointwise gap. This is the vertex-based approximation of the continuous
//! Fréchet distance, computed by an O(nm) dynamic program with two rows.

use crate::error::{Error, Result};
use crate::geometry::Point2;

pub fn discrete_frechet(a: &[Point2], b: &[Point2]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty(
            "Fréchet distance needs non-empty paths".into(),
        ));
    }
    let m = b.len();
    let mut prev = vec![0.0f64; m];
    let mut cur = vec![0.0f64; m];
    for (i, &p) in a.iter().enumerate() {
        for (j, &q) in b.iter().enumerate() {
            let d = p.distance(q);
            cur[j] = match (i, j) {
                (0, 0) => d,
                (0, _) => cur[j - 1].max(d),
                (_, 0) => prev[0].max(d),
                _ => prev[j].min(prev[j - 1]).min(cur[j - 1]).max(d),
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m - 1])
}
