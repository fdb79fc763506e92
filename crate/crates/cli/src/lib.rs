//! Experiment drivers, configuration, and report plumbing for the
//! induced-distribution toolbox CLI.

pub mod config;
pub mod experiments;
pub mod report;
