use serde::{Deserialize, Serialize};

use super::SolverError;
use crate::noise::NoiseModel;
use crate::spectral::{SpectralField, SpectralGrid};

/// Body force `f(t)`.
#[derive(Clone, Debug, Default)]
pub enum Forcing {
    #[default]
    None,
    Steady(SpectralField),
    /// `cos(ω t) · f`.
    Oscillating { field: SpectralField, omega: f64 },
}

impl Forcing {
    pub fn at(&self, t: f64) -> Option<SpectralField> {
        match self {
            Forcing::None => None,
            Forcing::Steady(f) => Some(f.clone()),
            Forcing::Oscillating { field, omega } => Some(field.scaled((omega * t).cos())),
        }
    }

    /// Largest `|f(t)|` over time.
    pub fn scale(&self) -> f64 {
        match self {
            Forcing::None => 0.0,
            Forcing::Steady(f) | Forcing::Oscillating { field: f, .. } => f.h_norm_sq().sqrt(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryKind {
    Deterministic,
    Stochastic,
    Skeleton,
    ShiftedProcess,
    Fluctuation,
}

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub grid: SpectralGrid,
    pub t_end: f64,
    pub dt: f64,
    pub epsilon: f64,
    /// Include the advection term `B`. Off gives the linear (Stokes / OU) regime.
    pub nonlinear: bool,
    pub forcing: Forcing,
    pub initial: SpectralField,
    pub noise: NoiseModel,
    /// Keep every `record_stride`-th step (the terminal state is always kept).
    pub record_stride: usize,
}

impl SimConfig {
    pub fn new(initial: SpectralField, noise: NoiseModel, t_end: f64, dt: f64) -> Result<Self, SolverError> {
        let cfg = Self {
            grid: initial.grid().clone(),
            t_end,
            dt,
            epsilon: 0.0,
            nonlinear: true,
            forcing: Forcing::None,
            initial,
            noise,
            record_stride: 1,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn linear(mut self) -> Self {
        self.nonlinear = false;
        self
    }

    pub fn with_forcing(mut self, forcing: Forcing) -> Self {
        self.forcing = forcing;
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride;
        self
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(SolverError::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(SolverError::Config(format!("T must be nonnegative, got {}", self.t_end)));
        }
        let n = (self.t_end / self.dt).round();
        if (n * self.dt - self.t_end).abs() > 1e-9 * self.t_end.max(self.dt) {
            return Err(SolverError::Config(format!("T = {} is not a multiple of dt = {}", self.t_end, self.dt)));
        }
        if !(self.epsilon >= 0.0) {
            return Err(SolverError::Config(format!("epsilon must be nonnegative, got {}", self.epsilon)));
        }
        if self.record_stride == 0 {
            return Err(SolverError::Config("record stride must be at least 1".into()));
        }
        if self.initial.grid() != &self.grid || self.noise.grid() != &self.grid {
            return Err(SolverError::Mismatch("initial condition, noise and config use different grids".into()));
        }
        match &self.forcing {
            Forcing::Steady(f) | Forcing::Oscillating { field: f, .. } if f.grid() != &self.grid => {
                return Err(SolverError::Mismatch("forcing lives on a different grid".into()));
            }
            _ => {}
        }
        if self.nonlinear && !self.grid.supports_products() {
            return Err(SolverError::Spectral(crate::spectral::SpectralError::Dealiasing {
                k_max: self.grid.k_max(),
                n_phys: self.grid.n_phys(),
            }));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    pub fn time(&self, step: usize) -> f64 {
        step as f64 * self.dt
    }

    /// `1e6 · max(|u₀|, sup|f|, 1)`.
    pub fn blowup_threshold(&self) -> f64 {
        1e6 * self.initial.h_norm_sq().sqrt().max(self.forcing.scale()).max(1.0)
    }
}
