//! Config-driven experiment runner for `snse-core`: TOML configs, JSON
//! reports, binary trajectories, SHA-256 manifests and CSV tables.

pub mod config;
pub mod error;
pub mod experiments;
pub mod manifest;
pub mod run;
pub mod tables;
pub mod trajio;
pub mod verify;

pub use config::ExperimentConfig;
pub use error::HarnessError;
pub use manifest::RunManifest;
pub use run::{run, Overrides, RunOutcome};
