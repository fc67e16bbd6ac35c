//! Slow reference implementations used to cross-check the production
//! algorithms (by the test suites and by `selftest`). Nothing here shares code
//! with the routines it checks.

use crate::geometry::{Aggregate, Point2};

/// True if the open segment `(a, b)` meets the open interior of the convex polygon.
///
/// Cyrus–Beck clipping of the segment against the closed polygon, followed by
/// a strict-interior test on the midpoint of the clipped piece: for a convex
/// set that midpoint is interior iff any point of the open piece is.
pub fn segment_crosses_interior(a: Point2, b: Point2, poly: &Aggregate) -> bool {
    let n = poly.vertices.len();
    let dir = Point2::new(b.x - a.x, b.y - a.y);
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for k in 0..n {
        let p = poly.vertices[k];
        let q = poly.vertices[(k + 1) % n];
        // Inward normal of a CCW edge.
        let normal = Point2::new(-(q.y - p.y), q.x - p.x);
        let num = normal.x * (a.x - p.x) + normal.y * (a.y - p.y);
        let den = normal.x * dir.x + normal.y * dir.y;
        if den == 0.0 {
            if num < 0.0 {
                return false;
            }
        } else {
            let t = -num / den;
            if den > 0.0 {
                t0 = t0.max(t);
            } else {
                t1 = t1.min(t);
            }
        }
        if t0 > t1 {
            return false;
        }
    }
    if t1 - t0 <= 0.0 {
        return false;
    }
    let tm = 0.5 * (t0 + t1);
    let m = Point2::new(a.x + tm * dir.x, a.y + tm * dir.y);
    (0..n).all(|k| {
        let p = poly.vertices[k];
        let q = poly.vertices[(k + 1) % n];
        let len = ((q.x - p.x).powi(2) + (q.y - p.y).powi(2)).sqrt();
        ((q.x - p.x) * (m.y - p.y) - (q.y - p.y) * (m.x - p.x)) / len > 1e-10
    })
}

/// Brute-force visibility: `z` is visible from `tip` iff the open segment
/// between them meets no aggregate interior.
pub fn visible(tip: Point2, z: Point2, aggregates: &[Aggregate]) -> bool {
    !aggregates
        .iter()
        .any(|a| segment_crosses_interior(tip, z, a))
}

/// Discrete Fréchet distance by enumerating every monotone coupling
/// (steps (1,0), (0,1), (1,1)) from `(0,0)` to `(n-1,m-1)`. Exponential; keep inputs short.
pub fn frechet_by_enumeration(a: &[Point2], b: &[Point2]) -> f64 {
    fn walk(a: &[Point2], b: &[Point2], i: usize, j: usize, running: f64, best: &mut f64) {
        let d = ((a[i].x - b[j].x).powi(2) + (a[i].y - b[j].y).powi(2)).sqrt();
        let running = running.max(d);
        if i + 1 == a.len() && j + 1 == b.len() {
            if running < *best {
                *best = running;
            }
            return;
        }
        if i + 1 < a.len() {
            walk(a, b, i + 1, j, running, best);
        }
        if j + 1 < b.len() {
            walk(a, b, i, j + 1, running, best);
        }
        if i + 1 < a.len() && j + 1 < b.len() {
            walk(a, b, i + 1, j + 1, running, best);
        }
    }
    let mut best = f64::INFINITY;
    walk(a, b, 0, 0, 0.0, &mut best);
    best
}

/// Kernel weight written out directly from the closed form, in linear space.
/// `mu`/`lambda` are the six parameters of the configuration.
pub fn kernel_weight_reference(
    f1: bool,
    d: f64,
    t: f64,
    same_aggregate: bool,
    p: &[f64; 6],
) -> f64 {
    if f1 {
        if same_aggregate {
            (-p[0] * t.powf(p[1])).exp()
        } else {
            (-p[2] * (d * t).powf(p[5]) - p[3] * d.powf(p[4])).exp()
        }
    } else {
        (-p[0] * (d * t).powf(p[4]) - p[1] * d.powf(p[5]) - p[2] * t.powf(p[3])).exp()
    }
}
