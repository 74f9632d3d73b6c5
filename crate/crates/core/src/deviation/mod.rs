//! Rate functional, Monte Carlo deviation estimators, trajectory norms and
//! empirical moment bounds.

mod constants;
mod energy;
mod lbfgs;
mod montecarlo;
mod moments;
mod rate;

pub use constants::{dual_norm_sq, epsilon_thresholds, moment_order_threshold, ConstantsLedger, EpsilonThresholds};
pub use energy::{dyadic_increment_stat, energy_distance, energy_norm, energy_norm_of};
pub use lbfgs::{minimize, LbfgsOptions, LbfgsOutcome};
pub use montecarlo::{
    fw_conditional_probe, mc_probabilities, mc_probability, mdp_scaling_probe, wilson_interval, FWConfig, FWReport,
    FWRow, ProbabilityEstimate, ScalingConfig, ScalingReport, ScalingRow, ScalingSpeed, ScalingTrend, sample_path,
};
pub(crate) use montecarlo::{deterministic_companion, per_sample};
pub use moments::{
    fit_power_law, moment_bound_suite, power_functional, MomentConfig, MomentFit, MomentReport, MomentRow, PowerFit,
    SkeletonBound,
};
pub use rate::{rate_function, shell_constant, OptParams, RateDiagnostics, RateResult, ShellConstant, SkeletonMap};

use thiserror::Error;

use crate::noise::NoiseError;
use crate::solvers::SolverError;
use crate::spectral::SpectralError;

#[derive(Debug, Error)]
pub enum DeviationError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("mismatched inputs: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}
