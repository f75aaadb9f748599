//! Multi-structure robust geometric model fitting.
//!
//! The pipeline estimates the number and parameters of model instances
//! (lines, circles, homographies, fundamental matrices) in data heavily
//! contaminated by gross and pseudo-outliers. It proceeds in stages:
//! proximity-sampled hypothesis generation with per-hypothesis inlier-scale
//! estimation, a sparse bipartite representation linking data points to
//! hypotheses, message propagation plus two-stage pruning of insignificant
//! hypotheses and gross outliers, and sparse affinity-propagation clustering
//! of the surviving points' preference vectors with a refinement pass that
//! merges fragments and refits each final instance.

pub mod bench;
pub mod clustering;
pub mod geometry;
pub mod hierarchy;
pub mod hypothesis;
pub mod pipeline;

pub use geometry::{ModelHypothesis, ModelKind, ObservationKind, PointSet};
pub use pipeline::{FitConfig, FitReport, Variant};
