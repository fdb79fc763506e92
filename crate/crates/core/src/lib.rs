//! Analytic toolbox for constraint-induced distributions at toy scale.
//!
//! A Gaussian-mixture prior and an intrinsic score field generate two
//! families of induced distributions: hard truncation on a super-level event,
//! and the exponential tilt that is KL-minimal under a mean-score constraint.
//! This crate provides those families, three sampler paradigms (finite-pool
//! retrieval, regularized mode-seeking optimization, and energy-guided
//! diffusion posterior sampling with a closed-form oracle score), and the
//! diagnostics that compare them: grid TV/KL, boundary mass, hazard rates,
//! threshold-instability measures, typical-set checks, and task-injection
//! distortion bounds.

pub mod constraints;
pub mod diagnostics;
pub mod diffusion;
pub mod error;
pub mod gmm;
pub mod grid;
pub mod heatmap;
pub mod point;
pub mod rng;
pub mod samplers;
pub mod score;

pub use error::{Error, Result};
pub use gmm::IsotropicGmm;
pub use grid::{kde_to_grid, Grid2D, GridDensity, KlDivergence};
pub use point::Point;
pub use rng::SeedPolicy;
pub use score::{Regularizer, ScoreField};
