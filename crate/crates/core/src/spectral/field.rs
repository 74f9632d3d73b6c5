use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::grid::{SpectralGrid, Wavevector};
use super::SpectralError;

pub type Amplitude = [Complex64; 2];

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const TORUS_AREA: f64 = 4.0 * PI * PI;

/// Divergence-free, mean-zero, real velocity field held as Fourier amplitudes
/// `u(x) = Σ_k û_k e^{ik·x}`.
#[derive(Clone, Debug)]
pub struct SpectralField {
    grid: SpectralGrid,
    coeffs: Vec<Amplitude>,
}

/// `|u|`, `‖u‖` and `‖u‖_{L⁴}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormBundle {
    pub h_norm: f64,
    pub v_norm: f64,
    pub l4_norm: f64,
}

impl SpectralField {
    pub fn zeros(grid: &SpectralGrid) -> Self {
        Self { grid: grid.clone(), coeffs: vec![[ZERO; 2]; grid.len()] }
    }

    /// Leray projection of a raw conjugate-symmetric amplitude array.
    ///
    /// The mean slot is discarded. Inputs that are not the spectrum of a real
    /// field are rejected.
    pub fn project_leray(grid: &SpectralGrid, raw: Vec<Amplitude>) -> Result<Self, SpectralError> {
        if raw.len() != grid.len() {
            return Err(SpectralError::Shape { expected: grid.len(), found: raw.len() });
        }
        if let Some(k) = symmetry_defect(grid, &raw) {
            return Err(SpectralError::NotReal(k));
        }
        let mut field = Self { grid: grid.clone(), coeffs: raw };
        field.coeffs[grid.zero_index()] = [ZERO; 2];
        field.leray_in_place();
        Ok(field)
    }

    /// Real mode pair: `û_k = a`, `û_{-k} = conj(a)`, then projected.
    pub fn mode_pair(grid: &SpectralGrid, k: Wavevector, amplitude: Amplitude) -> Result<Self, SpectralError> {
        if k.is_zero() || !grid.contains(k) {
            return Err(SpectralError::ModeOutOfRange(k));
        }
        let mut raw = vec![[ZERO; 2]; grid.len()];
        raw[grid.index(k)] = amplitude;
        raw[grid.index(k.neg())] = [amplitude[0].conj(), amplitude[1].conj()];
        Self::project_leray(grid, raw)
    }

    /// Field from point values on the `N × N` grid (row index along x).
    pub fn from_physical(grid: &SpectralGrid, u1: &[f64], u2: &[f64]) -> Result<Self, SpectralError> {
        let n2 = grid.n_phys() * grid.n_phys();
        if u1.len() != n2 || u2.len() != n2 {
            return Err(SpectralError::Shape { expected: n2, found: u1.len().min(u2.len()) });
        }
        let packed = u1.iter().zip(u2).map(|(&a, &b)| Complex64::new(a, b)).collect();
        let mut field = Self::zeros(grid);
        field.set_from_packed(grid.analyze(packed));
        field.leray_in_place();
        Ok(field)
    }

    /// Taylor–Green vortex `A (sin x cos y, −cos x sin y)`.
    pub fn taylor_green(grid: &SpectralGrid, amplitude: f64) -> Self {
        let mut f = Self::zeros(grid);
        let c = Complex64::new(0.0, -amplitude / 4.0);
        for (sx, sy) in [(1, 1), (1, -1), (-1, 1), (-1, -1)] {
            let k = Wavevector::new(sx, sy);
            let sign_x = f64::from(sx);
            let sign_y = f64::from(sy);
            f.coeffs[grid.index(k)] = [c * sign_x, -c * sign_y];
        }
        f
    }

    /// Random field with Gaussian amplitudes decaying like `|k|^{-slope}`.
    pub fn random<R: Rng + ?Sized>(grid: &SpectralGrid, rng: &mut R, slope: f64) -> Self {
        let mut raw = vec![[ZERO; 2]; grid.len()];
        for (i, k) in grid.modes() {
            if !k.is_representative() {
                continue;
            }
            let s = k.norm_sq().powf(-slope / 2.0);
            let mut draw = || Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)) * s;
            let a = [draw(), draw()];
            raw[i] = a;
            raw[grid.mirror(i)] = [a[0].conj(), a[1].conj()];
        }
        Self::project_leray(grid, raw).expect("symmetric by construction")
    }


    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Amplitude] {
        &self.coeffs
    }

    pub fn amplitude(&self, k: Wavevector) -> Amplitude {
        self.coeffs[self.grid.index(k)]
    }

    /// Overwrites coefficients without re-projecting. Used to build corrupted
    /// fixtures for negative checks.
    pub fn coeffs_mut_unchecked(&mut self) -> &mut [Amplitude] {
        &mut self.coeffs
    }

    pub(crate) fn set_from_packed(&mut self, packed: Vec<Complex64>) {
        // packed = f̂ + i ĝ with f, g real: split by conjugate symmetry.
        let half = Complex64::new(0.5, 0.0);
        for (i, _) in self.grid.modes() {
            let z = packed[i];
            let zm = packed[self.grid.mirror(i)].conj();
            self.coeffs[i] = [(z + zm) * half, (z - zm) * Complex64::new(0.0, -0.5)];
        }
    }

    pub(crate) fn leray_in_place(&mut self) {
        for (i, k) in self.grid.modes() {
            self.coeffs[i] = leray_mode(k, self.coeffs[i]);
        }
    }

    /// Per-mode diagonal map.
    pub fn map_modes(&self, mut f: impl FnMut(Wavevector, Amplitude) -> Amplitude) -> Self {
        let mut coeffs = vec![[ZERO; 2]; self.grid.len()];
        for (i, k) in self.grid.modes() {
            coeffs[i] = f(k, self.coeffs[i]);
        }
        Self { grid: self.grid.clone(), coeffs }
    }

    /// Stokes operator `A`: multiplication by `|k|²`.
    pub fn stokes(&self) -> Self {
        self.map_modes(|k, a| {
            let s = k.norm_sq();
            [a[0] * s, a[1] * s]
        })
    }

    pub fn scaled(&self, s: f64) -> Self {
        let coeffs = self.coeffs.iter().map(|a| [a[0] * s, a[1] * s]).collect();
        Self { grid: self.grid.clone(), coeffs }
    }

    /// `self += s · other`.
    pub fn axpy(&mut self, s: f64, other: &Self) {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            a[0] += b[0] * s;
            a[1] += b[1] * s;
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|a| a[0] == ZERO && a[1] == ZERO)
    }

    pub fn max_amplitude(&self) -> f64 {
        self.coeffs.iter().map(|a| a[0].norm().max(a[1].norm())).fold(0.0, f64::max)
    }

    /// Largest `|k·û_k|` and the mode where it occurs.
    pub fn max_divergence(&self) -> (f64, Wavevector) {
        let mut worst = (0.0, Wavevector::new(0, 0));
        for (i, k) in self.grid.modes() {
            let a = self.coeffs[i];
            let d = (a[0] * f64::from(k.kx) + a[1] * f64::from(k.ky)).norm();
            if d > worst.0 {
                worst = (d, k);
            }
        }
        worst
    }

    /// `max_k |k·û_k| / max_k |û_k|`, zero for the zero field.
    pub fn relative_divergence(&self) -> f64 {
        let m = self.max_amplitude();
        if m == 0.0 {
            0.0
        } else {
            self.max_divergence().0 / m
        }
    }

    pub fn is_conjugate_symmetric(&self) -> bool {
        symmetry_defect(&self.grid, &self.coeffs).is_none()
    }

    /// H inner product `∫ u·v dx`.
    pub fn inner_h(&self, other: &Self) -> f64 {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        let s: f64 = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a[0] * b[0].conj() + a[1] * b[1].conj()).re)
            .sum();
        TORUS_AREA * s
    }

    /// V inner product `Σ ∫ ∂ᵢuⱼ ∂ᵢvⱼ dx`.
    pub fn inner_v(&self, other: &Self) -> f64 {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        let s: f64 = self
            .grid
            .modes()
            .map(|(i, k)| {
                let (a, b) = (self.coeffs[i], other.coeffs[i]);
                k.norm_sq() * (a[0] * b[0].conj() + a[1] * b[1].conj()).re
            })
            .sum();
        TORUS_AREA * s
    }

    pub fn h_norm_sq(&self) -> f64 {
        self.inner_h(self)
    }

    pub fn v_norm_sq(&self) -> f64 {
        self.inner_v(self)
    }

    /// Point values `(u₁, u₂)` on the `N × N` grid.
    pub fn to_physical(&self) -> (Vec<f64>, Vec<f64>) {
        let packed: Vec<Complex64> = self.coeffs.iter().map(|a| a[0] + a[1] * Complex64::i()).collect();
        let vals = self.grid.synthesize(&packed);
        (vals.iter().map(|z| z.re).collect(), vals.iter().map(|z| z.im).collect())
    }

    pub fn norms(&self) -> NormBundle {
        let (u1, u2) = self.to_physical();
        let h = self.grid.spacing();
        let quartic: f64 = u1.iter().zip(&u2).map(|(a, b)| (a * a + b * b).powi(2)).sum::<f64>() * h * h;
        NormBundle {
            h_norm: self.h_norm_sq().sqrt(),
            v_norm: self.v_norm_sq().sqrt(),
            l4_norm: quartic.powf(0.25),
        }
    }

    /// Scalar vorticity `ω̂_k = i(k₁ û_{k,2} − k₂ û_{k,1})`.
    pub fn curl(&self) -> VorticityField {
        let mut coeffs = vec![ZERO; self.grid.len()];
        for (i, k) in self.grid.modes() {
            let a = self.coeffs[i];
            coeffs[i] = Complex64::i() * (a[1] * f64::from(k.kx) - a[0] * f64::from(k.ky));
        }
        VorticityField { grid: self.grid.clone(), coeffs }
    }

    pub fn to_record(&self) -> FieldRecord {
        let mut coeffs = Vec::with_capacity(4 * self.coeffs.len());
        for a in &self.coeffs {
            coeffs.extend_from_slice(&[a[0].re, a[0].im, a[1].re, a[1].im]);
        }
        FieldRecord { k_max: self.grid.k_max(), n_phys: self.grid.n_phys(), coeffs }
    }

    pub fn from_record(record: &FieldRecord) -> Result<Self, SpectralError> {
        let grid = SpectralGrid::new(record.k_max, record.n_phys)?;
        if record.coeffs.len() != 4 * grid.len() {
            return Err(SpectralError::Shape { expected: 4 * grid.len(), found: record.coeffs.len() });
        }
        let raw = record
            .coeffs
            .chunks_exact(4)
            .map(|c| [Complex64::new(c[0], c[1]), Complex64::new(c[2], c[3])])
            .collect();
        Self::project_leray(&grid, raw)
    }
}

/// `P_k = I − k kᵀ/|k|²` applied to one amplitude.
pub(crate) fn leray_mode(k: Wavevector, a: Amplitude) -> Amplitude {
    let (kx, ky) = (f64::from(k.kx), f64::from(k.ky));
    let dot = (a[0] * kx + a[1] * ky) / k.norm_sq();
    [a[0] - dot * kx, a[1] - dot * ky]
}

fn symmetry_defect(grid: &SpectralGrid, raw: &[Amplitude]) -> Option<Wavevector> {
    let scale = raw.iter().map(|a| a[0].norm().max(a[1].norm())).fold(0.0, f64::max);
    let tol = 1e-12 * scale.max(f64::MIN_POSITIVE);
    grid.modes().find_map(|(i, k)| {
        let (a, b) = (raw[i], raw[grid.mirror(i)]);
        let bad = (a[0] - b[0].conj()).norm() > tol || (a[1] - b[1].conj()).norm() > tol;
        bad.then_some(k)
    })
}

/// Scalar spectral field, the curl of a velocity field.
#[derive(Clone, Debug)]
pub struct VorticityField {
    grid: SpectralGrid,
    coeffs: Vec<Complex64>,
}

impl VorticityField {
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn at(&self, k: Wavevector) -> Complex64 {
        self.coeffs[self.grid.index(k)]
    }

    pub fn l2_norm(&self) -> f64 {
        (TORUS_AREA * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()).sqrt()
    }

    pub fn to_physical(&self) -> Vec<f64> {
        self.grid.synthesize(&self.coeffs).iter().map(|z| z.re).collect()
    }
}

/// Flat serialisable form: grid header plus `[re₁, im₁, re₂, im₂]` per slot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldRecord {
    pub k_max: usize,
    pub n_phys: usize,
    pub coeffs: Vec<f64>,
}
