use serde::{Deserialize, Serialize};

use super::DeviationError;
use crate::noise::NoiseModel;
use crate::solvers::Forcing;

/// Constants `K₁ … K₉`; unset entries are unknown (to be fitted).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstantsLedger {
    pub k: [Option<f64>; 9],
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonThresholds {
    /// `min{1/(2K₁²), 1/(4K₁), 1/(2K₂)}`, the range of the basic energy bounds.
    pub energy: f64,
    pub eps0: f64,
    pub eps1: f64,
    /// Depends on the moment order `p`.
    pub eps2: f64,
    pub p: f64,
}

impl ConstantsLedger {
    pub fn new(k1: f64, k2: f64, k9: f64) -> Self {
        let mut k = [None; 9];
        k[0] = Some(k1);
        k[1] = Some(k2);
        k[8] = Some(k9);
        Self { k }
    }

    /// `K₁ ≥ ∫₀ᵀ ‖f‖⁴_{V'}`, `K₂` and `K₃` from the noise family, and
    /// `K₉ = K₂`, which bounds `σ̃` because `‖az + u⁰‖² ≤ 2a²‖z‖² + 2‖u⁰‖²`.
    /// `K₁` is floored at the smallest normal float so it stays positive.
    pub fn from_model(noise: &NoiseModel, forcing: &Forcing, t_end: f64) -> Self {
        let f4 = match forcing {
            Forcing::None => 0.0,
            Forcing::Steady(f) => dual_norm_sq(f).powi(2) * t_end,
            // ∫₀ᵀ cos⁴ ≤ T
            Forcing::Oscillating { field, .. } => dual_norm_sq(field).powi(2) * t_end,
        };
        let d = noise.declared_constants();
        let mut ledger = Self::new(f4.max(f64::MIN_POSITIVE), d.k2, d.k2);
        ledger.k[2] = Some(d.k3);
        ledger
    }

    pub fn get(&self, index: usize) -> Option<f64> {
        self.k.get(index.checked_sub(1)?).copied().flatten()
    }

    pub fn set(&mut self, index: usize, value: f64) {
        self.k[index - 1] = Some(value);
    }

    fn required(&self, index: usize) -> Result<f64, DeviationError> {
        match self.get(index) {
            Some(v) if v > 0.0 && v.is_finite() => Ok(v),
            Some(v) => Err(DeviationError::Parameter(format!("K{index} must be positive, got {v}"))),
            None => Err(DeviationError::Parameter(format!("K{index} is not set"))),
        }
    }
}

/// `‖f‖²_{V'} = 4π² Σ |f̂_k|² / |k|²`.
pub fn dual_norm_sq(f: &crate::spectral::SpectralField) -> f64 {
    let grid = f.grid();
    let s: f64 = grid
        .modes()
        .map(|(i, k)| {
            let a = f.coeffs()[i];
            (a[0].norm_sqr() + a[1].norm_sqr()) / k.norm_sq()
        })
        .sum();
    4.0 * std::f64::consts::PI.powi(2) * s
}

/// `ε₀ = min{1/(2K₁²), 1/(4K₁), 1/(2K₂), 1/(78K₉)}`,
/// `ε₁ = min{1/(2K₁²), 1/(4K₁), 1/(2K₂), 1/(36K₉)}`,
/// `ε₂ = min{ε₁, 1/(K₉(36p + 2))}`.
pub fn epsilon_thresholds(ledger: &ConstantsLedger, p: f64) -> Result<EpsilonThresholds, DeviationError> {
    if !(p >= 1.0) {
        return Err(DeviationError::Parameter(format!("moment order p must be at least 1, got {p}")));
    }
    let k1 = ledger.required(1)?;
    let k2 = ledger.required(2)?;
    let k9 = ledger.required(9)?;
    let common = (1.0 / (2.0 * k1 * k1)).min(1.0 / (4.0 * k1)).min(1.0 / (2.0 * k2));
    let eps0 = common.min(1.0 / (78.0 * k9));
    let eps1 = common.min(1.0 / (36.0 * k9));
    let eps2 = eps1.min(1.0 / (k9 * (36.0 * p + 2.0)));
    Ok(EpsilonThresholds { energy: common, eps0, eps1, eps2, p })
}

/// Largest `ε` for the `2p`-th moment bound on `u^ε`: `2 / (1 + 2p)`.
pub fn moment_order_threshold(p: f64) -> f64 {
    2.0 / (1.0 + 2.0 * p)
}
