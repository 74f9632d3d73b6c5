//! Iterated-logarithm studies: the rescaled fluctuation `Z^ε`, finite probes
//! of the limit set `{I ≤ 1}` and the cluster / ratio / compactness studies.

mod probe;
mod studies;

pub use probe::{limit_set_distance, Candidate, LimitSetProbe};
pub use studies::{
    classical_ratio_study, compactness_study, strassen_cluster_study, ClusterReport, CompactnessReport, PairRow,
    RatioReport, RatioRow, TailRow,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::deviation::DeviationError;
use crate::solvers::{loglog_factor, SolverError, Trajectory, TrajectoryKind};

#[derive(Debug, Error)]
pub enum LilError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error(transparent)]
    Deviation(#[from] DeviationError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Noise levels `ε_j = c^{−j}` for `j = j_min..=j_max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LilSchedule {
    pub base: f64,
    pub j_min: u32,
    pub j_max: u32,
}

impl LilSchedule {
    pub fn new(base: f64, j_min: u32, j_max: u32) -> Result<Self, LilError> {
        let s = Self { base, j_min, j_max };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), LilError> {
        if !(self.base > 1.0) || !self.base.is_finite() {
            return Err(LilError::Parameter(format!("base must exceed 1, got {}", self.base)));
        }
        if self.j_max < self.j_min {
            return Err(LilError::Parameter(format!("empty index range {}..={}", self.j_min, self.j_max)));
        }
        if !(self.epsilon(self.j_max) > 0.0) {
            return Err(LilError::Parameter(format!("eps_{} underflows", self.j_max)));
        }
        loglog_factor(self.epsilon(self.j_min))
            .map_err(|_| LilError::Parameter(format!("eps_{} = {} is not below e^(-e)", self.j_min, self.epsilon(self.j_min))))?;
        Ok(())
    }

    /// Additionally requires `j_min > log(1/ε₀) / log c`.
    pub fn validate_against(&self, eps0: f64) -> Result<(), LilError> {
        self.validate()?;
        let j0 = (1.0 / eps0).ln() / self.base.ln();
        if !(self.j_min as f64 > j0) {
            return Err(LilError::Parameter(format!("j_min = {} must exceed log(1/eps0)/log(c) = {j0:.3}", self.j_min)));
        }
        Ok(())
    }

    pub fn epsilon(&self, j: u32) -> f64 {
        self.base.powi(-(j as i32))
    }

    pub fn indices(&self) -> impl Iterator<Item = u32> {
        self.j_min..=self.j_max
    }

    pub fn epsilons(&self) -> Vec<f64> {
        self.indices().map(|j| self.epsilon(j)).collect()
    }
}

/// `Z^ε = (u^ε − u⁰) / (2ε log log(1/ε))^{1/2}`.
pub fn z_process(u_eps: &Trajectory, u0: &Trajectory, epsilon: f64) -> Result<Trajectory, LilError> {
    let ll = loglog_factor(epsilon)?;
    if u_eps.times.len() != u0.times.len()
        || u_eps.times.iter().zip(&u0.times).any(|(a, b)| (a - b).abs() > 1e-12 * a.abs().max(1.0))
    {
        return Err(DeviationError::Mismatch("trajectories recorded on different times".into()).into());
    }
    let scale = 1.0 / (epsilon * ll).sqrt();
    let fields = u_eps.fields.iter().zip(&u0.fields).map(|(a, b)| a.sub(b).scaled(scale)).collect();
    Ok(Trajectory::from_fields(TrajectoryKind::Fluctuation, u_eps.times.clone(), fields)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{NoiseModel, NoiseSpec};
    use crate::solvers::{solve_deterministic, solve_snse, SimConfig};
    use crate::spectral::{SpectralField, SpectralGrid};

    fn cfg() -> SimConfig {
        let g = SpectralGrid::new(2, 8).unwrap();
        let noise = NoiseModel::new(&g, &NoiseSpec::default()).unwrap();
        SimConfig::new(SpectralField::taylor_green(&g, 1.0), noise, 0.1, 0.01).unwrap()
    }

    #[test]
    fn schedule_bounds() {
        assert!(LilSchedule::new(1.0, 3, 5).is_err());
        assert!(LilSchedule::new(2.0, 1, 5).is_err()); // 1/2 is above e^(-e)
        let s = LilSchedule::new(2.0, 4, 8).unwrap();
        assert_eq!(s.epsilons().len(), 5);
        assert_eq!(s.epsilon(4), 1.0 / 16.0);
        assert!(s.validate_against(1.0 / 78.0).is_err());
        assert!(LilSchedule::new(2.0, 7, 8).unwrap().validate_against(1.0 / 78.0).is_ok());
    }

    #[test]
    fn z_vanishes_without_fluctuation() {
        let c = cfg();
        let u0 = solve_deterministic(&c).unwrap();
        let z = z_process(&u0, &u0, 1e-3).unwrap();
        assert!(z.fields.iter().all(|f| f.is_zero()));
        assert!(z_process(&u0, &u0, 0.2).is_err());
    }

    #[test]
    fn z_is_homogeneous_in_the_fluctuation() {
        let c = cfg().with_epsilon(1e-3);
        let u0 = solve_deterministic(&c).unwrap();
        let u = solve_snse(&c, 2).unwrap();
        let alpha = 0.37;
        let mixed = u.combine(alpha, &u0, 1.0 - alpha, TrajectoryKind::Stochastic).unwrap();
        let za = z_process(&mixed, &u0, 1e-3).unwrap();
        let z = z_process(&u, &u0, 1e-3).unwrap();
        for (a, b) in za.fields.iter().zip(&z.fields) {
            let d = a.sub(&b.scaled(alpha)).max_amplitude();
            assert!(d <= 1e-12 * b.max_amplitude().max(1e-300), "{d}");
        }
    }
}
