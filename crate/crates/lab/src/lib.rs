//! Experiment harness around `specclust-core`: configuration, file formats,
//! parallel sweeps and report emission. The `specclust` binary is a thin CLI
//! over these modules.

pub mod config;
pub mod error;
pub mod io;
pub mod report;
pub mod sweep;

pub use config::ExperimentConfig;
pub use error::{LabError, LabResult};
