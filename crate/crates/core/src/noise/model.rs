use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::NoiseError;
use crate::spectral::{SpectralField, SpectralGrid, Wavevector};

/// Real basis function attached to a mode pair: `cos(k·x) τ` or `sin(k·x) τ`
/// with `τ = k⊥/|k|`, normalised in H.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Cos,
    Sin,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseDirection {
    pub mode: Wavevector,
    pub parity: Parity,
    /// Eigenvalue `λ_j` of the covariance `Q`.
    pub lambda: f64,
    /// Gain `g_j` of the noise coefficient along this direction.
    pub gain: f64,
}

impl NoiseDirection {
    /// `ê_k = s τ`, `ê_{-k} = conj(s) τ`.
    fn basis_scalar(&self) -> Complex64 {
        let c = 1.0 / (PI * 2f64.sqrt());
        match self.parity {
            Parity::Cos => Complex64::new(c / 2.0, 0.0),
            Parity::Sin => Complex64::new(0.0, -c / 2.0),
        }
    }

    fn tangent(&self) -> [f64; 2] {
        let n = self.mode.norm_sq().sqrt();
        [-f64::from(self.mode.ky) / n, f64::from(self.mode.kx) / n]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SigmaFamily {
    /// `σ(t, u) e_j = g_j e_j`.
    Additive,
    /// `σ(t, u) e_j = g_j m(‖u‖) e_j` with `m(r) = 1 + s₀ r / (s₀ + r)`.
    Saturated { saturation: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GainProfile {
    /// Every direction gets the base amplitude.
    Uniform,
    /// Base amplitude on the listed mode pairs, zero elsewhere.
    Modes { modes: Vec<[i32; 2]> },
    /// One gain per retained direction.
    Explicit { gains: Vec<f64> },
}

/// User-facing description of a noise model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// `λ_j = |k_j|^{-2s}`.
    #[serde(default = "default_exponent")]
    pub spectrum_exponent: f64,
    /// Number of retained directions; all modes of the grid when absent.
    #[serde(default)]
    pub num_directions: Option<usize>,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default = "default_family")]
    pub family: SigmaFamily,
    #[serde(default = "default_gains")]
    pub gains: GainProfile,
}

fn default_exponent() -> f64 {
    2.0
}
fn default_amplitude() -> f64 {
    1.0
}
fn default_family() -> SigmaFamily {
    SigmaFamily::Additive
}
fn default_gains() -> GainProfile {
    GainProfile::Uniform
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            spectrum_exponent: default_exponent(),
            num_directions: None,
            amplitude: default_amplitude(),
            family: default_family(),
            gains: default_gains(),
        }
    }
}

/// Truncated Q-Wiener noise with its coefficient family `σ(t, u)`.
///
/// Coordinates of an `H₀` element are taken in the orthonormal basis
/// `{e_j}` of H, so `|ξ|₀² = Σ ξ_j² / λ_j`.
#[derive(Clone, Debug)]
pub struct NoiseModel {
    grid: SpectralGrid,
    directions: Vec<NoiseDirection>,
    family: SigmaFamily,
    spectrum_exponent: f64,
}

impl NoiseModel {
    pub fn new(grid: &SpectralGrid, spec: &NoiseSpec) -> Result<Self, NoiseError> {
        if !(spec.spectrum_exponent > 0.0) {
            return Err(NoiseError::Parameter("spectrum exponent must be positive".into()));
        }
        if !(spec.amplitude >= 0.0) {
            return Err(NoiseError::Parameter("amplitude must be nonnegative".into()));
        }
        if let SigmaFamily::Saturated { saturation } = spec.family {
            if !(saturation > 0.0) {
                return Err(NoiseError::Parameter("saturation scale must be positive".into()));
            }
        }
        let mut reps: Vec<Wavevector> = grid.modes().map(|(_, k)| k).filter(|k| k.is_representative()).collect();
        reps.sort_by(|a, b| a.norm_sq().total_cmp(&b.norm_sq()).then(a.cmp(b)));
        let mut directions: Vec<NoiseDirection> = reps
            .iter()
            .flat_map(|&mode| {
                let lambda = mode.norm_sq().powf(-spec.spectrum_exponent);
                [Parity::Cos, Parity::Sin].map(|parity| NoiseDirection { mode, parity, lambda, gain: 0.0 })
            })
            .collect();
        if let Some(j) = spec.num_directions {
            if j == 0 || j > directions.len() {
                return Err(NoiseError::Parameter(format!(
                    "num_directions must lie in 1..={}, got {j}",
                    directions.len()
                )));
            }
            directions.truncate(j);
        }
        match &spec.gains {
            GainProfile::Uniform => directions.iter_mut().for_each(|d| d.gain = spec.amplitude),
            GainProfile::Modes { modes } => {
                for d in directions.iter_mut() {
                    let hit = modes.iter().any(|&[kx, ky]| {
                        let k = Wavevector::new(kx, ky);
                        k == d.mode || k.neg() == d.mode
                    });
                    d.gain = if hit { spec.amplitude } else { 0.0 };
                }
            }
            GainProfile::Explicit { gains } => {
                if gains.len() != directions.len() {
                    return Err(NoiseError::Dimension { expected: directions.len(), found: gains.len() });
                }
                for (d, &g) in directions.iter_mut().zip(gains) {
                    d.gain = g * spec.amplitude;
                }
            }
        }
        Ok(Self { grid: grid.clone(), directions, family: spec.family.clone(), spectrum_exponent: spec.spectrum_exponent })
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn num_directions(&self) -> usize {
        self.directions.len()
    }

    pub fn directions(&self) -> &[NoiseDirection] {
        &self.directions
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.directions.iter().map(|d| d.lambda).collect()
    }

    pub fn family(&self) -> &SigmaFamily {
        &self.family
    }

    pub fn spectrum_exponent(&self) -> f64 {
        self.spectrum_exponent
    }

    pub fn trace(&self) -> f64 {
        self.directions.iter().map(|d| d.lambda).sum()
    }

    /// Index of the direction attached to `(mode, parity)`, either sign of `mode`.
    pub fn direction_index(&self, mode: Wavevector, parity: Parity) -> Option<usize> {
        self.directions.iter().position(|d| (d.mode == mode || d.mode == mode.neg()) && d.parity == parity)
    }

    /// Multiplier `m(‖u‖)` applied to every gain.
    pub fn modulation(&self, u: &SpectralField) -> f64 {
        match self.family {
            SigmaFamily::Additive => 1.0,
            SigmaFamily::Saturated { saturation } => saturating_factor(saturation, u.v_norm_sq().sqrt()),
        }
    }

    /// Field `Σ_j c_j e_j`.
    pub fn field_from_coefficients(&self, coeffs: &[f64]) -> SpectralField {
        assert_eq!(coeffs.len(), self.directions.len(), "coefficient dimension");
        let mut field = SpectralField::zeros(&self.grid);
        let raw = field.coeffs_mut_unchecked();
        for (d, &c) in self.directions.iter().zip(coeffs) {
            if c == 0.0 {
                continue;
            }
            let s = d.basis_scalar() * c;
            let tau = d.tangent();
            let (ip, im) = (self.grid.index(d.mode), self.grid.index(d.mode.neg()));
            raw[ip][0] += s * tau[0];
            raw[ip][1] += s * tau[1];
            raw[im][0] += s.conj() * tau[0];
            raw[im][1] += s.conj() * tau[1];
        }
        field
    }

    /// `(u, e_j)_H` for every retained direction.
    pub fn coefficients_of(&self, u: &SpectralField) -> Vec<f64> {
        self.directions
            .iter()
            .map(|d| {
                let a = u.amplitude(d.mode);
                let tau = d.tangent();
                let along = a[0] * tau[0] + a[1] * tau[1];
                8.0 * PI * PI * (d.basis_scalar().conj() * along).re
            })
            .collect()
    }

    /// Coordinates of `σ(t, u) ξ` in the basis `{e_j}`.
    pub fn sigma_coefficients(&self, _t: f64, u: &SpectralField, xi: &[f64]) -> Result<Vec<f64>, NoiseError> {
        if xi.len() != self.directions.len() {
            return Err(NoiseError::Dimension { expected: self.directions.len(), found: xi.len() });
        }
        let m = self.modulation(u);
        Ok(self.directions.iter().zip(xi).map(|(d, &x)| d.gain * m * x).collect())
    }

    /// `σ(t, u) ξ` as a divergence-free field.
    pub fn sigma_apply(&self, t: f64, u: &SpectralField, xi: &[f64]) -> Result<SpectralField, NoiseError> {
        Ok(self.field_from_coefficients(&self.sigma_coefficients(t, u, xi)?))
    }

    /// `‖σ(t, u)‖²_{L_Q} = Σ_j λ_j g_j² m²` in closed form.
    pub fn lq_norm_sq(&self, _t: f64, u: &SpectralField) -> f64 {
        let m = self.modulation(u);
        m * m * self.directions.iter().map(|d| d.lambda * d.gain * d.gain).sum::<f64>()
    }

    /// `Σ_j λ_j g_j² |k_j|²`, the squared L_Q norm of `curl σ` at unit modulation.
    pub(crate) fn curl_weight(&self) -> f64 {
        self.directions.iter().map(|d| d.lambda * d.gain * d.gain * d.mode.norm_sq()).sum()
    }
}

/// `1 + s₀ r / (s₀ + r)`: equals 1 at the origin, grows with unit slope, plateaus at `1 + s₀`.
pub fn saturating_factor(saturation: f64, r: f64) -> f64 {
    1.0 + saturation * r / (saturation + r)
}
