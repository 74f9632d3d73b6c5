//! Truncated Q-Wiener noise, the coefficient families `σ(t, u)`, Cameron–Martin
//! controls and sampling checks of the growth and Lipschitz bounds on `σ`.

mod assumptions;
mod control;
mod model;
mod wiener;

use thiserror::Error;

pub use assumptions::{verify_assumptions, AssumptionReport, SigmaConstants, SweepPoint};
pub use control::{Control, ControlRecord};
pub use model::{saturating_factor, GainProfile, NoiseDirection, NoiseModel, NoiseSpec, Parity, SigmaFamily};
pub use wiener::{sample_wiener_increment, WienerPath};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NoiseError {
    #[error("expected {expected} noise coefficients, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("invalid noise parameter: {0}")]
    Parameter(String),
}
