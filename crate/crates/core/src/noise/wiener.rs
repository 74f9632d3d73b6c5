use rand::Rng;
use rand_distr::StandardNormal;

use super::{NoiseError, NoiseModel};

/// One increment `ΔW` of the Q-Wiener process in the coordinates of `{e_j}`:
/// independent `N(0, λ_j Δt)` entries.
pub fn sample_wiener_increment<R: Rng + ?Sized>(model: &NoiseModel, dt: f64, rng: &mut R) -> Vec<f64> {
    model
        .directions()
        .iter()
        .map(|d| {
            let z: f64 = rng.sample(StandardNormal);
            (d.lambda * dt).sqrt() * z
        })
        .collect()
}

/// Pre-sampled increments on a uniform time grid, stored step-major.
///
/// Keeping the path explicit lets several solvers (or several noise
/// intensities) consume the same realisation.
#[derive(Clone, Debug, PartialEq)]
pub struct WienerPath {
    dt: f64,
    steps: usize,
    dim: usize,
    increments: Vec<f64>,
}

impl WienerPath {
    pub fn sample<R: Rng + ?Sized>(model: &NoiseModel, dt: f64, steps: usize, rng: &mut R) -> Self {
        let dim = model.num_directions();
        let mut increments = Vec::with_capacity(steps * dim);
        for _ in 0..steps {
            increments.extend(sample_wiener_increment(model, dt, rng));
        }
        Self { dt, steps, dim, increments }
    }

    pub fn zero(dim: usize, dt: f64, steps: usize) -> Self {
        Self { dt, steps, dim, increments: vec![0.0; steps * dim] }
    }

    pub fn from_increments(dim: usize, dt: f64, increments: Vec<f64>) -> Result<Self, NoiseError> {
        if dim == 0 || increments.len() % dim != 0 {
            return Err(NoiseError::Dimension { expected: dim, found: increments.len() });
        }
        Ok(Self { dt, steps: increments.len() / dim, dim, increments })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn increment(&self, step: usize) -> &[f64] {
        &self.increments[step * self.dim..(step + 1) * self.dim]
    }

    /// `W(t_m)` for `m = 0..=steps`.
    pub fn cumulative(&self) -> Vec<Vec<f64>> {
        let mut w = vec![0.0; self.dim];
        let mut out = Vec::with_capacity(self.steps + 1);
        out.push(w.clone());
        for m in 0..self.steps {
            for (wj, dj) in w.iter_mut().zip(self.increment(m)) {
                *wj += dj;
            }
            out.push(w.clone());
        }
        out
    }

    /// Sums consecutive blocks of `factor` increments.
    pub fn coarsened(&self, factor: usize) -> Result<Self, NoiseError> {
        if factor == 0 || self.steps % factor != 0 {
            return Err(NoiseError::Parameter(format!("cannot coarsen {} steps by {factor}", self.steps)));
        }
        let steps = self.steps / factor;
        let mut increments = vec![0.0; steps * self.dim];
        for m in 0..self.steps {
            let dst = &mut increments[(m / factor) * self.dim..(m / factor + 1) * self.dim];
            for (a, b) in dst.iter_mut().zip(self.increment(m)) {
                *a += b;
            }
        }
        Ok(Self { dt: self.dt * factor as f64, steps, dim: self.dim, increments })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseSpec;
    use crate::rng::stream;
    use crate::spectral::SpectralGrid;

    #[test]
    fn increment_variances_match_spectrum() {
        let g = SpectralGrid::new(2, 8).unwrap();
        let m = NoiseModel::new(&g, &NoiseSpec { spectrum_exponent: 1.0, ..NoiseSpec::default() }).unwrap();
        let dt = 0.01;
        let n = 20_000;
        let mut rng = stream(11, 0);
        let path = WienerPath::sample(&m, dt, n, &mut rng);
        for (j, d) in m.directions().iter().enumerate() {
            let var: f64 = (0..n).map(|s| path.increment(s)[j].powi(2)).sum::<f64>() / n as f64;
            let expect = d.lambda * dt;
            // 5 standard errors of a chi-square mean
            assert!((var - expect).abs() < 5.0 * expect * (2.0 / n as f64).sqrt(), "direction {j}");
        }
    }

    #[test]
    fn coarsening_preserves_endpoint() {
        let g = SpectralGrid::new(2, 8).unwrap();
        let m = NoiseModel::new(&g, &NoiseSpec::default()).unwrap();
        let path = WienerPath::sample(&m, 0.1, 12, &mut stream(3, 1));
        let c = path.coarsened(4).unwrap();
        assert_eq!(c.steps(), 3);
        let a = path.cumulative();
        let b = c.cumulative();
        for j in 0..m.num_directions() {
            assert!((a[12][j] - b[3][j]).abs() < 1e-14);
        }
        assert!(path.coarsened(5).is_err());
    }
}
