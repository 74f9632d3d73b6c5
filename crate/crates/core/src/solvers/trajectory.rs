use serde::{Deserialize, Serialize};

use super::{SolverError, TrajectoryKind};
use crate::spectral::SpectralField;

/// `sup_{s≤t} |u(s)|²` and `∫₀ᵗ ‖u(s)‖² ds` at solver resolution.
///
/// The integral over a step freezes the state at the left endpoint and lets
/// each mode decay at its Stokes rate, i.e. weights `|k|² |û_k|²` by
/// `(1 − e^{−2|k|² dt}) / (2|k|²)` instead of `dt`. Free decay is then
/// integrated exactly; otherwise the rule is first-order like the plain
/// left-endpoint sum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunningFunctionals {
    pub sup_h_sq: f64,
    pub int_v_sq: f64,
}

impl RunningFunctionals {
    /// `(sup|u|² + ∫‖u‖²)^{1/2}`.
    pub fn energy_norm(&self) -> f64 {
        (self.sup_h_sq + self.int_v_sq).sqrt()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: Option<u64>,
    pub config_hash: Option<String>,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub kind: TrajectoryKind,
    pub times: Vec<f64>,
    pub fields: Vec<SpectralField>,
    /// Running functionals at each recorded time.
    pub functionals: Vec<RunningFunctionals>,
    /// Largest `max_k |k·û_k| / max_k |û_k|` over every solver step.
    pub max_relative_divergence: f64,
    pub provenance: Provenance,
}

impl Trajectory {
    /// Builds a trajectory from recorded states, computing the running
    /// functionals on the given times.
    pub fn from_fields(kind: TrajectoryKind, times: Vec<f64>, fields: Vec<SpectralField>) -> Result<Self, SolverError> {
        if times.len() != fields.len() || fields.is_empty() {
            return Err(SolverError::Mismatch(format!("{} times for {} fields", times.len(), fields.len())));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SolverError::Mismatch("times must increase strictly".into()));
        }
        let mut rec = Recorder::new(kind, 1);
        let mut prev: Option<f64> = None;
        for (t, f) in times.iter().zip(&fields) {
            if let Some(p) = prev {
                rec.integrate_to(t - p);
            }
            rec.observe(*t, f);
            prev = Some(*t);
        }
        Ok(rec.finish(Provenance::default()))
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn initial(&self) -> &SpectralField {
        &self.fields[0]
    }

    pub fn terminal(&self) -> &SpectralField {
        self.fields.last().expect("nonempty")
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("nonempty")
    }

    pub fn final_functionals(&self) -> RunningFunctionals {
        *self.functionals.last().expect("nonempty")
    }

    /// Whether every solver step `0..=steps` of width `dt` is recorded.
    pub fn covers_steps(&self, steps: usize, dt: f64) -> bool {
        self.fields.len() == steps + 1
            && self.times.iter().enumerate().all(|(m, t)| (t - m as f64 * dt).abs() <= 1e-9 * dt.max(1.0))
    }

    /// Pointwise `a·self + b·other` on a common recording grid.
    pub fn combine(&self, a: f64, other: &Trajectory, b: f64, kind: TrajectoryKind) -> Result<Trajectory, SolverError> {
        if self.times != other.times {
            return Err(SolverError::Mismatch("trajectories recorded on different times".into()));
        }
        let fields = self.fields.iter().zip(&other.fields).map(|(x, y)| {
            let mut z = x.scaled(a);
            z.axpy(b, y);
            z
        });
        Trajectory::from_fields(kind, self.times.clone(), fields.collect())
    }

    /// `sup_t |u(t)|^{2p}` over the recorded times.
    pub fn sup_h_power(&self, p: f64) -> f64 {
        self.fields.iter().map(|f| f.h_norm_sq().powf(p)).fold(0.0, f64::max)
    }
}

/// Accumulates running functionals at every step and keeps a subsample of states.
#[derive(Debug)]
pub(crate) struct Recorder {
    kind: TrajectoryKind,
    stride: usize,
    count: usize,
    current: RunningFunctionals,
    last: Option<SpectralField>,
    weights: Option<(f64, Vec<f64>)>,
    max_div: f64,
    times: Vec<f64>,
    fields: Vec<SpectralField>,
    functionals: Vec<RunningFunctionals>,
    pending: Option<(f64, SpectralField)>,
}

impl Recorder {
    pub(crate) fn new(kind: TrajectoryKind, stride: usize) -> Self {
        Self {
            kind,
            stride,
            count: 0,
            current: RunningFunctionals::default(),
            last: None,
            weights: None,
            max_div: 0.0,
            times: Vec::new(),
            fields: Vec::new(),
            functionals: Vec::new(),
            pending: None,
        }
    }

    /// Adds the integral of `‖u‖²` over the interval of length `dt` that
    /// starts at the previous observation.
    pub(crate) fn integrate_to(&mut self, dt: f64) {
        let Some(u) = self.last.as_ref() else { return };
        let grid = u.grid();
        if self.weights.as_ref().map(|(d, w)| *d != dt || w.len() != grid.len()).unwrap_or(true) {
            let mut w = vec![0.0; grid.len()];
            for (i, k) in grid.modes() {
                w[i] = -(-2.0 * k.norm_sq() * dt).exp_m1() / 2.0;
            }
            self.weights = Some((dt, w));
        }
        let w = &self.weights.as_ref().expect("set above").1;
        let s: f64 = u.coeffs().iter().zip(w).map(|(a, w)| (a[0].norm_sqr() + a[1].norm_sqr()) * w).sum();
        self.current.int_v_sq += 4.0 * std::f64::consts::PI.powi(2) * s;
    }

    pub(crate) fn observe(&mut self, t: f64, u: &SpectralField) {
        self.current.sup_h_sq = self.current.sup_h_sq.max(u.h_norm_sq());
        self.last = Some(u.clone());
        self.max_div = self.max_div.max(u.relative_divergence());
        if self.count % self.stride == 0 {
            self.times.push(t);
            self.fields.push(u.clone());
            self.functionals.push(self.current);
            self.pending = None;
        } else {
            self.pending = Some((t, u.clone()));
        }
        self.count += 1;
    }

    pub(crate) fn finish(mut self, provenance: Provenance) -> Trajectory {
        if let Some((t, u)) = self.pending.take() {
            self.times.push(t);
            self.fields.push(u);
            self.functionals.push(self.current);
        }
        Trajectory {
            kind: self.kind,
            times: self.times,
            fields: self.fields,
            functionals: self.functionals,
            max_relative_divergence: self.max_div,
            provenance,
        }
    }
}
