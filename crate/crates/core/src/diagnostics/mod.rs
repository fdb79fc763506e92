//! Distributional measurements over the induced families.

pub mod gaussian;
pub mod identities;
pub mod instability;
pub mod scalar_law;
pub mod typical;

pub use gaussian::{gaussian_closed_forms, GaussianClosedForms};
pub use identities::{kl_decomposition_residual, tilt_kl_closed_form};
pub use instability::{mean_tv_instability, tv_instability, ConstraintFamily, InstabilityContext};
pub use scalar_law::{boundary_mass, hazard_hard, hazard_klsc, ScalarScoreLaw};
pub use typical::{chi_square_tail_check, tv_lower, ChiSquareTailCheck};
