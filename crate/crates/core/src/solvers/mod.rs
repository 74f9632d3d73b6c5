//! Time integration of the deterministic system `u⁰`, the stochastic system
//! `u^ε`, the skeleton equation `X^h` and the shifted process `Z̃^ε`.
//!
//! Every scheme is the same integrating-factor step: the Stokes part is
//! solved exactly per mode, advection and forcing are explicit, and noise is
//! evaluated at the left endpoint.

mod config;
mod integrate;
mod stepper;
mod trajectory;


use thiserror::Error;

use crate::noise::NoiseError;
use crate::spectral::SpectralError;

pub use config::{Forcing, SimConfig, TrajectoryKind};
pub use integrate::{
    integrate_skeleton, integrate_snse, integrate_tilde_z, loglog_factor, solve_deterministic, solve_skeleton,
    solve_snse, solve_snse_with_path, solve_tilde_z, solve_tilde_z_with_path,
};
pub use stepper::{step_deterministic, step_snse, Stepper};
pub use trajectory::{Provenance, RunningFunctionals, Trajectory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("integration failed at step {step}: |u| = {norm:e}")]
    Blowup { step: usize, norm: f64 },
    #[error("inconsistent inputs: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
}
