//! Sampling methodologies: finite-pool retrieval and reweighting,
//! rejection/importance samplers for the constraint families, and multi-start
//! regularized optimization.

pub mod mc;
pub mod optreg;
pub mod pool;

pub use mc::{rejection_sample_truncation, snis_resample_tilt};
pub use optreg::{opt_reg_map, run_restarts, OptRunConfig, OptRunOutput};
pub use pool::{empirical_tilt, retrieval_topk_match, CandidatePool, WeightedSampleSet};
