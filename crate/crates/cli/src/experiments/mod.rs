//! Experiment drivers. Each driver writes CSV/PNG artifacts under its own
//! subdirectory and reports how many ordering assertions or calibrations
//! failed, which the binary folds into its exit code.

pub mod diffusion_check;
pub mod gaussian_forms;
pub mod samplers_cmp;
pub mod table1;
pub mod task_injection;
pub mod typical_set;

/// Stream ids, one per experiment, fixed so reports are stable.
pub mod stream {
    pub const TABLE1: u32 = 1;
    pub const SAMPLERS: u32 = 2;
    pub const GAUSSIAN: u32 = 3;
    pub const TASK: u32 = 4;
    pub const TYPICAL: u32 = 5;
    pub const DIFFUSION: u32 = 6;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct ExperimentOutcome {
    pub ordering_failures: usize,
    pub calibration_failures: usize,
}

impl ExperimentOutcome {
    pub fn merge(&mut self, other: ExperimentOutcome) {
        self.ordering_failures += other.ordering_failures;
        self.calibration_failures += other.calibration_failures;
    }
}
