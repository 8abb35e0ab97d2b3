//! Experiment harness, file formats and CLI plumbing for `unifwatch-core`.

pub mod calibration;
mod error;
pub mod experiment;
pub mod families;
pub mod io;
pub mod stats;

pub use error::{HarnessError, Result, EXIT_CONFIG, EXIT_IO};
pub use experiment::{run_experiment, ExperimentConfig, Outcome, Summary, TesterSpec, TrialRecord};
pub use families::{realize_family, DistributionFamilySpec, Family, Sampler};
