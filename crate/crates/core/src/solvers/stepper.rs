use super::SolverError;
use crate::noise::NoiseModel;
use crate::spectral::{bilinear, SpectralField, SpectralGrid};

/// Per-mode weights of the integrating-factor step
/// `û' = e^{−a dt} û + φ(a) ĝ + ψ(a) n̂`, `a = |k|²`, where `g` is the
/// explicit drift and `n` the noise increment.
///
/// `φ(a) = (1 − e^{−a dt}) / a` integrates a frozen drift exactly and
/// `ψ(a) = ((1 − e^{−2a dt}) / (2a dt))^{1/2}` gives the exact transition
/// variance of the linear Ornstein–Uhlenbeck part.
#[derive(Clone, Debug)]
pub struct Stepper {
    grid: SpectralGrid,
    dt: f64,
    decay: Vec<f64>,
    phi: Vec<f64>,
    psi: Vec<f64>,
}

impl Stepper {
    pub fn new(grid: &SpectralGrid, dt: f64) -> Self {
        let mut decay = vec![0.0; grid.len()];
        let mut phi = vec![0.0; grid.len()];
        let mut psi = vec![0.0; grid.len()];
        for (i, k) in grid.modes() {
            let a = k.norm_sq();
            decay[i] = (-a * dt).exp();
            phi[i] = -(-a * dt).exp_m1() / a;
            psi[i] = if dt > 0.0 { (-(-2.0 * a * dt).exp_m1() / (2.0 * a * dt)).sqrt() } else { 1.0 };
        }
        Self { grid: grid.clone(), dt, decay, phi, psi }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn decay(&self, idx: usize) -> f64 {
        self.decay[idx]
    }

    pub fn phi(&self, idx: usize) -> f64 {
        self.phi[idx]
    }

    pub fn psi(&self, idx: usize) -> f64 {
        self.psi[idx]
    }

    /// Multiplies each mode by `e^{−|k|² dt}`.
    pub fn apply_decay(&self, u: &SpectralField) -> SpectralField {
        self.diagonal(u, &self.decay)
    }

    /// Multiplies each mode by `φ(|k|²)`.
    pub fn apply_phi(&self, u: &SpectralField) -> SpectralField {
        self.diagonal(u, &self.phi)
    }

    fn diagonal(&self, u: &SpectralField, w: &[f64]) -> SpectralField {
        let mut out = u.clone();
        for (a, &s) in out.coeffs_mut_unchecked().iter_mut().zip(w) {
            a[0] *= s;
            a[1] *= s;
        }
        out
    }

    pub fn advance(&self, u: &SpectralField, drift: Option<&SpectralField>, noise: Option<&SpectralField>) -> SpectralField {
        let mut out = u.clone();
        let grid = &self.grid;
        let dc = drift.map(|d| d.coeffs());
        let nc = noise.map(|n| n.coeffs());
        let raw = out.coeffs_mut_unchecked();
        for (i, _) in grid.modes() {
            let e = self.decay[i];
            let mut a = [raw[i][0] * e, raw[i][1] * e];
            if let Some(d) = dc {
                a[0] += d[i][0] * self.phi[i];
                a[1] += d[i][1] * self.phi[i];
            }
            if let Some(n) = nc {
                a[0] += n[i][0] * self.psi[i];
                a[1] += n[i][1] * self.psi[i];
            }
            raw[i] = a;
        }
        out
    }
}

/// `f − B(u, u)`, or `None` when both terms are absent.
pub(crate) fn navier_stokes_drift(
    u: &SpectralField,
    forcing: Option<&SpectralField>,
    nonlinear: bool,
) -> Result<Option<SpectralField>, SolverError> {
    let mut drift = match forcing {
        Some(f) => Some(f.clone()),
        None => None,
    };
    if nonlinear {
        let b = bilinear(u, u)?;
        match drift.as_mut() {
            Some(d) => d.axpy(-1.0, &b),
            None => drift = Some(b.scaled(-1.0)),
        }
    }
    Ok(drift)
}

fn check_finite(u: &SpectralField, step: usize) -> Result<(), SolverError> {
    let n = u.h_norm_sq();
    if n.is_finite() {
        Ok(())
    } else {
        Err(SolverError::Blowup { step, norm: n.sqrt() })
    }
}

/// One step of the deterministic system: exact Stokes factor, explicit
/// dealiased advection and forcing.
pub fn step_deterministic(
    u: &SpectralField,
    forcing: Option<&SpectralField>,
    dt: f64,
    nonlinear: bool,
) -> Result<SpectralField, SolverError> {
    let stepper = Stepper::new(u.grid(), dt);
    let drift = navier_stokes_drift(u, forcing, nonlinear)?;
    let out = stepper.advance(u, drift.as_ref(), None);
    check_finite(&out, 1)?;
    Ok(out)
}

/// One step of the stochastic system with Itô (left-point) noise `√ε σ(t, u) ΔW`.
#[allow(clippy::too_many_arguments)]
pub fn step_snse(
    u: &SpectralField,
    forcing: Option<&SpectralField>,
    epsilon: f64,
    model: &NoiseModel,
    t: f64,
    dw: &[f64],
    dt: f64,
    nonlinear: bool,
) -> Result<SpectralField, SolverError> {
    let stepper = Stepper::new(u.grid(), dt);
    let drift = navier_stokes_drift(u, forcing, nonlinear)?;
    let noise = stochastic_increment(model, epsilon, t, u, dw)?;
    let out = stepper.advance(u, drift.as_ref(), noise.as_ref());
    check_finite(&out, 1)?;
    Ok(out)
}

/// `√ε σ(t, u) ΔW`; `None` when `ε = 0` so the step reduces to the deterministic one exactly.
pub(crate) fn stochastic_increment(
    model: &NoiseModel,
    epsilon: f64,
    t: f64,
    u: &SpectralField,
    dw: &[f64],
) -> Result<Option<SpectralField>, SolverError> {
    if epsilon == 0.0 {
        return Ok(None);
    }
    let mut c = model.sigma_coefficients(t, u, dw)?;
    let s = epsilon.sqrt();
    c.iter_mut().for_each(|x| *x *= s);
    Ok(Some(model.field_from_coefficients(&c)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseSpec;
    use crate::spectral::Wavevector;
    use num_complex::Complex64;

    #[test]
    fn zero_stays_zero() {
        let g = SpectralGrid::new(3, 10).unwrap();
        let z = SpectralField::zeros(&g);
        assert!(step_deterministic(&z, None, 0.01, true).unwrap().is_zero());
    }

    #[test]
    fn stokes_decay_is_exact_per_mode() {
        let g = SpectralGrid::new(3, 10).unwrap();
        let k = Wavevector::new(2, -1);
        let a = [Complex64::new(1.0, 0.5), Complex64::new(2.0, 1.0)];
        let u = SpectralField::mode_pair(&g, k, a).unwrap();
        let v = step_deterministic(&u, None, 0.1, false).unwrap();
        let expect = (-5.0f64 * 0.1).exp();
        let got = v.amplitude(k);
        let orig = u.amplitude(k);
        for c in 0..2 {
            assert!((got[c] - orig[c] * expect).norm() < 1e-15);
        }
    }

    #[test]
    fn taylor_green_decays_without_nonlinear_transfer() {
        let g = SpectralGrid::new(4, 14).unwrap();
        let tg = SpectralField::taylor_green(&g, 1.0);
        let nl = step_deterministic(&tg, None, 0.01, true).unwrap();
        let lin = step_deterministic(&tg, None, 0.01, false).unwrap();
        assert!(nl.sub(&lin).max_amplitude() < 1e-16);
    }

    #[test]
    fn zero_epsilon_matches_deterministic_bitwise() {
        let g = SpectralGrid::new(4, 14).unwrap();
        let m = NoiseModel::new(&g, &NoiseSpec::default()).unwrap();
        let u = SpectralField::taylor_green(&g, 1.0).add(&SpectralField::random(&g, &mut crate::rng::stream(1, 1), 1.0));
        let dw = vec![0.3; m.num_directions()];
        let a = step_snse(&u, None, 0.0, &m, 0.0, &dw, 0.01, true).unwrap();
        let b = step_deterministic(&u, None, 0.01, true).unwrap();
        assert_eq!(a.coeffs(), b.coeffs());
    }

    #[test]
    fn weights_limit_to_dt_for_small_rates() {
        let g = SpectralGrid::new(1, 4).unwrap();
        let s = Stepper::new(&g, 1e-8);
        let i = g.index(Wavevector::new(1, 0));
        assert!((s.phi(i) - 1e-8).abs() < 1e-15);
        assert!((s.psi(i) - 1.0).abs() < 1e-7);
    }
}
