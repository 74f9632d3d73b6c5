use super::LilError;
use crate::deviation::{energy_distance, DeviationError};
use crate::noise::Control;
use crate::solvers::{solve_skeleton, SimConfig, Trajectory};

/// A control with `½∫|h|₀² ≤ 1` and its skeleton image `g = X^h`.
#[derive(Clone, Debug)]
pub struct Candidate {
    pub id: usize,
    pub label: String,
    pub control: Control,
    pub image: Trajectory,
}

/// Finite subset of the limit set `{g : I(g) ≤ 1}`. The distance to it is an
/// upper bound for the distance to the whole set.
#[derive(Clone, Debug)]
pub struct LimitSetProbe {
    candidates: Vec<Candidate>,
    pub tolerance: f64,
}

const ENERGY_SLACK: f64 = 1e-12;

impl LimitSetProbe {
    pub fn new(tolerance: f64) -> Self {
        Self { candidates: Vec::new(), tolerance }
    }

    /// Adds `X^h` after checking `½∫|h|₀² ≤ 1`.
    pub fn push(&mut self, label: impl Into<String>, control: Control, cfg: &SimConfig, u0: &Trajectory) -> Result<usize, LilError> {
        let rate = 0.5 * control.energy();
        if !(rate <= 1.0 + ENERGY_SLACK) {
            return Err(LilError::Parameter(format!("candidate has rate {rate} > 1")));
        }
        let image = solve_skeleton(&control, u0, cfg)?;
        let id = self.candidates.len();
        self.candidates.push(Candidate { id, label: label.into(), control, image });
        Ok(id)
    }

    /// The zero path only.
    pub fn zero(cfg: &SimConfig, u0: &Trajectory, tolerance: f64) -> Result<Self, LilError> {
        let mut p = Self::new(tolerance);
        p.push("zero", Control::zero(&cfg.noise, cfg.t_end, cfg.steps()), cfg, u0)?;
        Ok(p)
    }

    /// Zero plus `±cos(nπt/T)` along every noise direction with nonzero gain,
    /// `n = 0..=harmonics`, rescaled so that `½∫|h|₀²` equals each entry of
    /// `levels` (each in `(0, 1]`). Raising `harmonics` extends the candidate
    /// list, so probes are nested.
    pub fn sinusoidal(
        cfg: &SimConfig,
        u0: &Trajectory,
        harmonics: u32,
        levels: &[f64],
        tolerance: f64,
    ) -> Result<Self, LilError> {
        if levels.iter().any(|&l| !(l > 0.0 && l <= 1.0)) {
            return Err(LilError::Parameter("rate levels must lie in (0, 1]".into()));
        }
        let mut p = Self::zero(cfg, u0, tolerance)?;
        let dirs = cfg.noise.directions();
        let (t_end, steps) = (cfg.t_end, cfg.steps());
        for n in 0..=harmonics {
            for (j, d) in dirs.iter().enumerate() {
                if d.gain == 0.0 {
                    continue;
                }
                let shape = Control::from_fn(&cfg.noise, t_end, steps, |t| {
                    let mut v = vec![0.0; dirs.len()];
                    v[j] = (n as f64 * std::f64::consts::PI * t / t_end).cos();
                    v
                })
                .map_err(DeviationError::from)?;
                let e = shape.energy();
                if !(e > 0.0) {
                    continue;
                }
                for &level in levels {
                    for sign in [1.0, -1.0] {
                        let c = shape.scaled(sign * (2.0 * level / e).sqrt());
                        let label = format!("{}cos({n}πt/T) e{j} @ {level}", if sign > 0.0 { "+" } else { "-" });
                        p.push(label, c, cfg, u0)?;
                    }
                }
            }
        }
        Ok(p)
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

/// `min_i ‖z − g_i‖_{𝓔(T)}` and the minimizing candidate id.
pub fn limit_set_distance(z: &Trajectory, probe: &LimitSetProbe) -> Result<(f64, usize), LilError> {
    let mut best = (f64::INFINITY, usize::MAX);
    for c in probe.candidates() {
        let d = energy_distance(z, &c.image)?;
        if d < best.0 {
            best = (d, c.id);
        }
    }
    if best.1 == usize::MAX {
        return Err(LilError::Parameter("probe has no candidates".into()));
    }
    Ok(best)
}
