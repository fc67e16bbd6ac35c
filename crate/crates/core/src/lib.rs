//! Stochastic surrogate for crack paths in two-phase microstructures made of a
//! matrix and convex polygonal aggregates.
//!
//! A crack is a sequence of aggregate-boundary discretization points. At each
//! tip the reachable points are filtered by a forward field of view and by the
//! shadows cast by aggregates, scored with two normalized indicators (distance
//! and angle to the propagation direction), and the next point is drawn from an
//! exponential transition kernel. Kernel parameters are fitted by maximum
//! likelihood from training cracks, and ensembles of simulated cracks are
//! summarized by a median path, a percentile confidence region and tortuosity
//! statistics.

pub mod analysis;
pub mod error;
pub mod estimation;
pub mod geometry;
pub mod io;
pub mod model;
pub mod morphology;
pub mod oracle;
pub mod prediction;
pub mod rng;
pub mod selftest;
pub mod svg;

pub use error::{Error, Result};
pub use geometry::{
    Aggregate, Candidate, CandidateSet, Configuration, DiscretizationPoint,
    DiscretizedMicrostructure, Microstructure, Point2, TipState,
};
pub use model::{KernelParamsF1, KernelParamsF2, ModelParams};
pub use prediction::{CrackPath, Ensemble};
