//! Transition kernel of the crack Markov chain.
//!
//! Configuration F1 (tip can follow its own aggregate):
//!
//! ```text
//! f(d, θ) = exp(-μ1 θ^μ2)                        same aggregate
//! f(d, θ) = exp(-μ3 (d θ)^μ6 - μ4 d^μ5)          other aggregates
//! ```
//!
//! Configuration F2 (matrix crossing only):
//!
//! ```text
//! f(d, θ) = exp(-λ1 (d θ)^λ5 - λ2 d^λ6 - λ3 θ^λ4)
//! ```
//!
//! `d`, `θ` are the per-tip normalized indicators in `[0, 1]`. Weights are
//! normalized over the candidate set to give transition probabilities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CandidateSet, Configuration};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParamsF1 {
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
    pub mu4: f64,
    pub mu5: f64,
    pub mu6: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParamsF2 {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda4: f64,
    pub lambda5: f64,
    pub lambda6: f64,
}

impl KernelParamsF1 {
    pub fn to_array(self) -> [f64; 6] {
        [self.mu1, self.mu2, self.mu3, self.mu4, self.mu5, self.mu6]
    }

    pub fn from_array(p: [f64; 6]) -> Self {
        KernelParamsF1 {
            mu1: p[0],
            mu2: p[1],
            mu3: p[2],
            mu4: p[3],
            mu5: p[4],
            mu6: p[5],
        }
    }
}

impl KernelParamsF2 {
    pub fn to_array(self) -> [f64; 6] {
        [
            self.lambda1,
            self.lambda2,
            self.lambda3,
            self.lambda4,
            self.lambda5,
            self.lambda6,
        ]
    }

    pub fn from_array(p: [f64; 6]) -> Self {
        KernelParamsF2 {
            lambda1: p[0],
            lambda2: p[1],
            lambda3: p[2],
            lambda4: p[3],
            lambda5: p[4],
            lambda6: p[5],
        }
    }
}

/// Parameters of both configurations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub f1: KernelParamsF1,
    pub f2: KernelParamsF2,
}

impl Default for ModelParams {
    /// Estimates obtained on 35 finite-element-cracked microstructures with square aggregates.
    fn default() -> Self {
        ModelParams {
            f1: KernelParamsF1 {
                mu1: 7.06,
                mu2: 4.1,
                mu3: 30.2,
                mu4: 8.9,
                mu5: 0.2,
                mu6: 0.85,
            },
            f2: KernelParamsF2 {
                lambda1: 34.2,
                lambda2: 9.2,
                lambda3: 13.16,
                lambda4: 1.79,
                lambda5: 1.08,
                lambda6: 0.42,
            },
        }
    }
}

impl ModelParams {
    /// All twelve values strictly positive and finite.
    pub fn validate(&self) -> Result<()> {
        let all = self.f1.to_array().into_iter().chain(self.f2.to_array());
        for (i, v) in all.enumerate() {
            if !(v.is_finite() && v > 0.0) {
                let name = if i < 6 {
                    format!("mu{}", i + 1)
                } else {
                    format!("lambda{}", i - 5)
                };
                return Err(Error::InvalidArgument(format!(
                    "kernel parameter {name} = {v} must be positive and finite"
                )));
            }
        }
        Ok(())
    }

    /// Parameters of one configuration as a flat array.
    pub fn get(&self, c: Configuration) -> [f64; 6] {
        match c {
            Configuration::F1 => self.f1.to_array(),
            Configuration::F2 => self.f2.to_array(),
        }
    }

    pub fn set(&mut self, c: Configuration, p: [f64; 6]) {
        match c {
            Configuration::F1 => self.f1 = KernelParamsF1::from_array(p),
            Configuration::F2 => self.f2 = KernelParamsF2::from_array(p),
        }
    }
}

/// `x^e` for `x ≥ 0`, `e > 0`, with `0^e = 0`.
#[inline]
fn pow(x: f64, e: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x.powf(e)
    }
}

/// Log of the F1 kernel weight.
pub fn log_kernel_f1(d: f64, theta: f64, same_aggregate: bool, p: &KernelParamsF1) -> f64 {
    if same_aggregate {
        -p.mu1 * pow(theta, p.mu2)
    } else {
        -p.mu3 * pow(d * theta, p.mu6) - p.mu4 * pow(d, p.mu5)
    }
}

/// Log of the F2 kernel weight.
pub fn log_kernel_f2(d: f64, theta: f64, p: &KernelParamsF2) -> f64 {
    -p.lambda1 * pow(d * theta, p.lambda5)
        - p.lambda2 * pow(d, p.lambda6)
        - p.lambda3 * pow(theta, p.lambda4)
}

pub fn kernel_f1(d: f64, theta: f64, same_aggregate: bool, p: &KernelParamsF1) -> f64 {
    log_kernel_f1(d, theta, same_aggregate, p).exp()
}

pub fn kernel_f2(d: f64, theta: f64, p: &KernelParamsF2) -> f64 {
    log_kernel_f2(d, theta, p).exp()
}

/// Log-weight of one normalized candidate under a configuration's flat parameter array.
pub fn log_weight(
    configuration: Configuration,
    d: f64,
    theta: f64,
    same_aggregate: bool,
    p: &[f64; 6],
) -> f64 {
    match configuration {
        Configuration::F1 => {
            log_kernel_f1(d, theta, same_aggregate, &KernelParamsF1::from_array(*p))
        }
        Configuration::F2 => log_kernel_f2(d, theta, &KernelParamsF2::from_array(*p)),
    }
}

/// Normalizes log-weights into probabilities with a max shift.
pub fn softmax(log_weights: &[f64]) -> Vec<f64> {
    let max = log_weights
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_weights.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Probability of moving to each candidate, in candidate order.
pub fn transition_probabilities(cs: &CandidateSet, p: &ModelParams) -> Result<Vec<f64>> {
    if cs.candidates.is_empty() {
        return Err(Error::Empty("candidate set has no points".into()));
    }
    let params = p.get(cs.configuration);
    let logs: Vec<f64> = cs
        .candidates
        .iter()
        .map(|c| {
            log_weight(
                cs.configuration,
                c.d_norm,
                c.theta_norm,
                c.same_aggregate,
                &params,
            )
        })
        .collect();
    Ok(softmax(&logs))
}
