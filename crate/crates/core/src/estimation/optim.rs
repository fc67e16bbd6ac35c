//! Box-projected BFGS with Armijo backtracking, for small smooth problems.

#[derive(Debug, Clone)]
pub struct BfgsOptions {
    pub max_iterations: usize,
    /// Stop when one accepted step changes the objective by less than this.
    pub f_tolerance: f64,
    /// Stop when the projected gradient's max-norm falls below this.
    pub g_tolerance: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn clip(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, l), h) in x.iter_mut().zip(lo).zip(hi) {
        *v = v.clamp(*l, *h);
    }
}

/// Coordinates sitting on a bound with the gradient pushing outward.
fn active_set(x: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> Vec<bool> {
    (0..x.len())
        .map(|i| (x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0))
        .collect()
}

/// Minimizes `f` over the box `[lower, upper]`. `eval` returns value and gradient.
pub fn minimize<F>(eval: F, x0: &[f64], opts: &BfgsOptions) -> Minimum
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let mut x = x0.to_vec();
    clip(&mut x, &opts.lower, &opts.upper);
    let (mut f, mut g) = eval(&x);
    let mut h = identity(n);
    let mut fresh = true;
    for it in 0..opts.max_iterations {
        let active = active_set(&x, &g, &opts.lower, &opts.upper);
        let pg_norm = (0..n)
            .filter(|&i| !active[i])
            .map(|i| g[i].abs())
            .fold(0.0, f64::max);
        if pg_norm < opts.g_tolerance {
            return Minimum {
                x,
                f,
                iterations: it,
                converged: true,
            };
        }
        let mut d = direction(&h, &g, &active);
        if dot(&g, &d) >= 0.0 {
            h = identity(n);
            fresh = true;
            d = direction(&h, &g, &active);
        }
        let mut t = 1.0;
        let accepted = loop {
            let mut xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            clip(&mut xn, &opts.lower, &opts.upper);
            let step: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
            let (fn_, gn) = eval(&xn);
            if fn_.is_finite() && fn_ <= f + 1e-4 * dot(&g, &step) {
                break Some((xn, step, fn_, gn));
            }
            t *= 0.5;
            if t < 1e-14 {
                break None;
            }
        };
        let Some((xn, s, fn_, gn)) = accepted else {
            if !fresh {
                h = identity(n);
                fresh = true;
                continue;
            }
            // Even steepest descent cannot decrease f: minimum to working precision.
            return Minimum {
                x,
                f,
                iterations: it,
                converged: true,
            };
        };
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if fresh {
                let scale = sy / dot(&y, &y);
                for (i, row) in h.iter_mut().enumerate() {
                    row.iter_mut().for_each(|v| *v = 0.0);
                    row[i] = scale;
                }
                fresh = false;
            }
            bfgs_update(&mut h, &s, &y, sy);
        }
        let df = f - fn_;
        x = xn;
        f = fn_;
        g = gn;
        if df.abs() < opts.f_tolerance {
            return Minimum {
                x,
                f,
                iterations: it + 1,
                converged: true,
            };
        }
    }
    Minimum {
        x,
        f,
        iterations: opts.max_iterations,
        converged: false,
    }
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

fn direction(h: &[Vec<f64>], g: &[f64], active: &[bool]) -> Vec<f64> {
    let n = g.len();
    (0..n)
        .map(|i| {
            if active[i] {
                0.0
            } else {
                -(0..n)
                    .filter(|&j| !active[j])
                    .map(|j| h[i][j] * g[j])
                    .sum::<f64>()
            }
        })
        .collect()
}

/// Inverse-Hessian update `H ← (I − ρsyᵀ) H (I − ρysᵀ) + ρssᵀ`.
fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| dot(&h[i], y)).collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i][j] += rho * ((1.0 + rho * yhy) * s[i] * s[j] - hy[i] * s[j] - s[i] * hy[j]);
        }
    }
}

/// Central finite-difference gradient with step `step`.
pub fn numeric_gradient<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], step: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += step;
            xm[i] -= step;
            (f(&xp) - f(&xm)) / (2.0 * step)
        })
        .collect()
}
