use serde::{Deserialize, Serialize};

use super::{NoiseError, NoiseModel};

/// Piecewise-constant Cameron–Martin control: value `h_m` on `[t_m, t_{m+1})`,
/// stored as coordinates over the retained noise directions.
#[derive(Clone, Debug, PartialEq)]
pub struct Control {
    t_end: f64,
    steps: usize,
    lambdas: Vec<f64>,
    values: Vec<f64>,
    energy: f64,
}

/// JSON form: the time grid and a `J × M` coefficient matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlRecord {
    pub times: Vec<f64>,
    pub lambdas: Vec<f64>,
    /// `coefficients[j][m]` is the value on cell `m` along direction `j`.
    pub coefficients: Vec<Vec<f64>>,
}

impl Control {
    /// Row-major `steps × J` values.
    pub fn from_values(lambdas: Vec<f64>, t_end: f64, steps: usize, values: Vec<f64>) -> Result<Self, NoiseError> {
        if steps == 0 && t_end != 0.0 || !(t_end >= 0.0) {
            return Err(NoiseError::Parameter(format!("bad control grid: T={t_end}, steps={steps}")));
        }
        if lambdas.iter().any(|&l| !(l > 0.0)) {
            return Err(NoiseError::Parameter("eigenvalues must be positive".into()));
        }
        if values.len() != steps * lambdas.len() {
            return Err(NoiseError::Dimension { expected: steps * lambdas.len(), found: values.len() });
        }
        let mut c = Self { t_end, steps, lambdas, values, energy: 0.0 };
        c.energy = c.compute_energy();
        Ok(c)
    }

    pub fn zero(model: &NoiseModel, t_end: f64, steps: usize) -> Self {
        let j = model.num_directions();
        Self::from_values(model.lambdas(), t_end, steps, vec![0.0; steps * j]).expect("valid zero control")
    }

    pub fn constant(model: &NoiseModel, t_end: f64, steps: usize, value: &[f64]) -> Result<Self, NoiseError> {
        if value.len() != model.num_directions() {
            return Err(NoiseError::Dimension { expected: model.num_directions(), found: value.len() });
        }
        let values = (0..steps).flat_map(|_| value.iter().copied()).collect();
        Self::from_values(model.lambdas(), t_end, steps, values)
    }

    /// Samples `f(t_m)` at the left endpoint of every cell.
    pub fn from_fn(model: &NoiseModel, t_end: f64, steps: usize, f: impl Fn(f64) -> Vec<f64>) -> Result<Self, NoiseError> {
        let dt = if steps == 0 { 0.0 } else { t_end / steps as f64 };
        let mut values = Vec::with_capacity(steps * model.num_directions());
        for m in 0..steps {
            let v = f(m as f64 * dt);
            if v.len() != model.num_directions() {
                return Err(NoiseError::Dimension { expected: model.num_directions(), found: v.len() });
            }
            values.extend(v);
        }
        Self::from_values(model.lambdas(), t_end, steps, values)
    }

    fn compute_energy(&self) -> f64 {
        (0..self.steps).map(|m| self.norm0_sq_at(m)).sum::<f64>() * self.dt()
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dim(&self) -> usize {
        self.lambdas.len()
    }

    pub fn dt(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.t_end / self.steps as f64
        }
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn value(&self, step: usize) -> &[f64] {
        let j = self.dim();
        &self.values[step * j..(step + 1) * j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `|h_m|₀² = Σ_j h_{m,j}² / λ_j`.
    pub fn norm0_sq_at(&self, step: usize) -> f64 {
        self.value(step).iter().zip(&self.lambdas).map(|(h, l)| h * h / l).sum()
    }

    /// `∫₀ᵀ |h(s)|₀² ds`, cached.
    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn in_ball(&self, radius: f64) -> bool {
        self.energy <= radius
    }

    pub fn scaled(&self, a: f64) -> Self {
        let values = self.values.iter().map(|v| v * a).collect();
        Self::from_values(self.lambdas.clone(), self.t_end, self.steps, values).expect("same shape")
    }

    pub fn add(&self, other: &Self) -> Result<Self, NoiseError> {
        self.check_compatible(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Self::from_values(self.lambdas.clone(), self.t_end, self.steps, values)
    }

    /// `max_m |h_m − k_m|₀`.
    pub fn sup_distance(&self, other: &Self) -> Result<f64, NoiseError> {
        self.check_compatible(other)?;
        let j = self.dim();
        Ok((0..self.steps)
            .map(|m| {
                (0..j)
                    .map(|i| (self.values[m * j + i] - other.values[m * j + i]).powi(2) / self.lambdas[i])
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max))
    }

    /// Same function on a grid `factor` times finer.
    pub fn refined(&self, factor: usize) -> Self {
        assert!(factor > 0);
        let j = self.dim();
        let mut values = Vec::with_capacity(self.values.len() * factor);
        for m in 0..self.steps {
            for _ in 0..factor {
                values.extend_from_slice(&self.values[m * j..(m + 1) * j]);
            }
        }
        Self::from_values(self.lambdas.clone(), self.t_end, self.steps * factor, values).expect("same shape")
    }

    /// `∫₀^{t_m} h(s) ds` for `m = 0..=steps`.
    pub fn integral(&self) -> Vec<Vec<f64>> {
        let j = self.dim();
        let dt = self.dt();
        let mut acc = vec![0.0; j];
        let mut out = vec![acc.clone()];
        for m in 0..self.steps {
            for (a, h) in acc.iter_mut().zip(self.value(m)) {
                *a += h * dt;
            }
            out.push(acc.clone());
        }
        out
    }

    fn check_compatible(&self, other: &Self) -> Result<(), NoiseError> {
        if self.steps != other.steps || self.lambdas != other.lambdas || self.t_end != other.t_end {
            return Err(NoiseError::Parameter("controls live on different grids".into()));
        }
        Ok(())
    }

    pub fn to_record(&self) -> ControlRecord {
        let dt = self.dt();
        let j = self.dim();
        ControlRecord {
            times: (0..=self.steps).map(|m| m as f64 * dt).collect(),
            lambdas: self.lambdas.clone(),
            coefficients: (0..j).map(|i| (0..self.steps).map(|m| self.values[m * j + i]).collect()).collect(),
        }
    }

    pub fn from_record(rec: &ControlRecord) -> Result<Self, NoiseError> {
        let steps = rec.times.len().saturating_sub(1);
        let t_end = rec.times.last().copied().unwrap_or(0.0);
        let j = rec.lambdas.len();
        if rec.coefficients.len() != j || rec.coefficients.iter().any(|row| row.len() != steps) {
            return Err(NoiseError::Dimension { expected: j * steps, found: rec.coefficients.iter().map(Vec::len).sum() });
        }
        let mut values = vec![0.0; steps * j];
        for (i, row) in rec.coefficients.iter().enumerate() {
            for (m, v) in row.iter().enumerate() {
                values[m * j + i] = *v;
            }
        }
        Self::from_values(rec.lambdas.clone(), t_end, steps, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseSpec;
    use crate::spectral::SpectralGrid;
    use proptest::prelude::*;

    fn model() -> NoiseModel {
        NoiseModel::new(&SpectralGrid::new(2, 8).unwrap(), &NoiseSpec::default()).unwrap()
    }

    #[test]
    fn zero_control_has_zero_energy() {
        let m = model();
        assert_eq!(Control::zero(&m, 1.0, 10).energy(), 0.0);
    }

    #[test]
    fn constant_control_energy_is_c_squared_t() {
        let m = model();
        let l = m.lambdas();
        // |h|₀ = 3 along one direction
        let mut v = vec![0.0; m.num_directions()];
        v[4] = 3.0 * l[4].sqrt();
        let h = Control::constant(&m, 2.5, 40, &v).unwrap();
        assert!((h.energy() - 9.0 * 2.5).abs() < 1e-12);
        assert!(h.in_ball(22.5 + 1e-9));
        assert!(!h.in_ball(22.0));
    }

    #[test]
    fn record_roundtrip() {
        let m = model();
        let h = Control::from_fn(&m, 1.0, 5, |t| (0..m.num_directions()).map(|j| t * j as f64).collect()).unwrap();
        let json = serde_json::to_string(&h.to_record()).unwrap();
        let back = Control::from_record(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back, h);
    }

    proptest! {
        #[test]
        fn refinement_preserves_energy(
            seed in proptest::collection::vec(-3.0f64..3.0, 1..6),
            factor in 1usize..12,
        ) {
            let m = model();
            let j = m.num_directions();
            let steps = seed.len();
            let values: Vec<f64> = (0..steps * j).map(|i| seed[i % steps] * (1.0 + (i % 7) as f64)).collect();
            let h = Control::from_values(m.lambdas(), 1.3, steps, values).unwrap();
            let fine = h.refined(factor);
            // independent Riemann sum on the refined grid
            let dt = 1.3 / (steps * factor) as f64;
            let l = m.lambdas();
            let riemann: f64 = (0..steps * factor)
                .map(|k| fine.value(k).iter().zip(&l).map(|(v, l)| v * v / l).sum::<f64>() * dt)
                .sum();
            prop_assert!((fine.energy() - h.energy()).abs() <= 1e-12 * h.energy().max(1.0));
            prop_assert!((riemann - h.energy()).abs() <= 1e-12 * h.energy().max(1.0));
        }
    }
}
