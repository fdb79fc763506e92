//! DDPM machinery with a closed-form oracle score for the mixture prior, and
//! the energy-guided reverse sampler built on it.

pub mod noised;
pub mod reverse;
pub mod schedule;

pub use noised::{noised_gmm_at, oracle_score, oracle_score_jacobian, oracle_score_of, NoisedGmm};
pub use reverse::{
    calibrate_guidance, energydps_reverse_to, energydps_sample, reverse_step, EnergyDpsOutput,
    GuidanceConfig, ReverseState,
};
pub use schedule::{build_linear_schedule, DdpmSchedule};
