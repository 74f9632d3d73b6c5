use serde::{Deserialize, Serialize};

use super::energy::energy_norm_of;
use super::lbfgs::{minimize, LbfgsOptions};
use super::DeviationError;
use crate::noise::Control;
use crate::rng::stream;
use crate::solvers::{integrate_skeleton, SimConfig, Stepper, Trajectory};
use crate::spectral::{advection_transpose, bilinear, SpectralField};
use rand::Rng;
use rand_distr::StandardNormal;

/// The linear map `h ↦ X^h` (skeleton started at zero, noise coefficient
/// frozen along `u⁰`) together with its exact discrete adjoint.
///
/// Controls are also handled in whitened coordinates
/// `y_{m,j} = h_{m,j} (Δt / λ_j)^{1/2}`, in which `∫|h|₀² = |y|²`.
pub struct SkeletonMap<'a> {
    cfg: &'a SimConfig,
    u0: &'a Trajectory,
    stepper: Stepper,
    gains: Vec<f64>,
    modulation: Vec<f64>,
    scale: Vec<f64>,
}

impl<'a> SkeletonMap<'a> {
    pub fn new(cfg: &'a SimConfig, u0: &'a Trajectory) -> Result<Self, DeviationError> {
        cfg.validate()?;
        if !u0.covers_steps(cfg.steps(), cfg.dt) || u0.initial().grid() != &cfg.grid {
            return Err(DeviationError::Mismatch(format!(
                "deterministic trajectory must record all {} solver states on the config grid",
                cfg.steps() + 1
            )));
        }
        let model = &cfg.noise;
        Ok(Self {
            cfg,
            u0,
            stepper: Stepper::new(&cfg.grid, cfg.dt),
            gains: model.directions().iter().map(|d| d.gain).collect(),
            modulation: u0.fields[..cfg.steps()].iter().map(|u| model.modulation(u)).collect(),
            scale: model.lambdas().iter().map(|l| (l / cfg.dt).sqrt()).collect(),
        })
    }

    pub fn config(&self) -> &SimConfig {
        self.cfg
    }

    pub fn steps(&self) -> usize {
        self.cfg.steps()
    }

    pub fn dim(&self) -> usize {
        self.gains.len()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps()).map(|m| self.cfg.time(m)).collect()
    }

    pub fn control_from_scaled(&self, y: &[f64]) -> Result<Control, DeviationError> {
        let j = self.dim();
        let values = y.iter().enumerate().map(|(i, y)| y * self.scale[i % j]).collect();
        Ok(Control::from_values(self.cfg.noise.lambdas(), self.cfg.t_end, self.steps(), values)?)
    }

    pub fn scaled_from_control(&self, h: &Control) -> Vec<f64> {
        let j = self.dim();
        h.values().iter().enumerate().map(|(i, h)| h / self.scale[i % j]).collect()
    }

    /// `X_0, …, X_M`.
    pub fn forward(&self, h: &Control) -> Result<Vec<SpectralField>, DeviationError> {
        let mut out = Vec::with_capacity(self.steps() + 1);
        integrate_skeleton(h, self.u0, self.cfg, &mut |_, _, x| out.push(x.clone()))?;
        Ok(out)
    }

    /// Gradient of `h ↦ Σ_m (G_m, X_m^h)` with respect to the control values
    /// (row-major `steps × J`).
    pub fn pullback(&self, seeds: &[SpectralField]) -> Result<Vec<f64>, DeviationError> {
        let (steps, j) = (self.steps(), self.dim());
        if seeds.len() != steps + 1 {
            return Err(DeviationError::Mismatch(format!("{} adjoint seeds for {} states", seeds.len(), steps + 1)));
        }
        let model = &self.cfg.noise;
        let mut grad = vec![0.0; steps * j];
        let mut p = seeds[steps].clone();
        for m in (0..steps).rev() {
            let phi_p = self.stepper.apply_phi(&p);
            let c = model.coefficients_of(&phi_p);
            let w = self.modulation[m];
            for i in 0..j {
                grad[m * j + i] = self.gains[i] * w * c[i];
            }
            if m == 0 {
                break;
            }
            let mut next = self.stepper.apply_decay(&p);
            if self.cfg.nonlinear {
                let base = &self.u0.fields[m];
                next.axpy(-1.0, &advection_transpose(base, &phi_p)?);
                next.axpy(1.0, &bilinear(base, &phi_p)?);
            }
            next.axpy(1.0, &seeds[m]);
            p = next;
        }
        Ok(grad)
    }

    /// Chain rule into whitened coordinates.
    fn to_scaled_gradient(&self, grad_h: &mut [f64]) {
        let j = self.dim();
        grad_h.iter_mut().enumerate().for_each(|(i, g)| *g *= self.scale[i % j]);
    }

    /// Smooth squared distance `S(e) = softmax_β(|e_m|²) + Σ_{m<M} ‖e_m‖² Δt`
    /// with its adjoint seeds `∂S/∂e_m`.
    fn surrogate(&self, errors: &[SpectralField], beta: f64) -> (f64, Vec<SpectralField>) {
        let dt = self.cfg.dt;
        let last = errors.len() - 1;
        let a: Vec<f64> = errors.iter().map(|e| e.h_norm_sq()).collect();
        let amax = a.iter().copied().fold(0.0, f64::max);
        let ex: Vec<f64> = a.iter().map(|x| (beta * (x - amax)).exp()).collect();
        let total: f64 = ex.iter().sum();
        let soft = amax + (total / a.len() as f64).ln() / beta;
        let mut s = soft;
        let seeds = errors
            .iter()
            .enumerate()
            .map(|(m, e)| {
                let mut g = e.scaled(2.0 * ex[m] / total);
                if m < last {
                    s += e.v_norm_sq() * dt;
                    g.axpy(2.0 * dt, &e.stokes());
                }
                g
            })
            .collect();
        (s, seeds)
    }

    /// `J(y) = ½|y|² + (μ/2) S(X^{h(y)} − v)` and its gradient in `y`.
    pub fn penalty_objective(
        &self,
        y: &[f64],
        target: &[SpectralField],
        mu: f64,
        beta: f64,
    ) -> Result<(f64, Vec<f64>), DeviationError> {
        let h = self.control_from_scaled(y)?;
        let xs = self.forward(&h)?;
        let errors: Vec<SpectralField> = xs.iter().zip(target).map(|(x, v)| x.sub(v)).collect();
        let (s, mut seeds) = self.surrogate(&errors, beta);
        seeds.iter_mut().for_each(|g| *g = g.scaled(0.5 * mu));
        let mut grad = self.pullback(&seeds)?;
        self.to_scaled_gradient(&mut grad);
        grad.iter_mut().zip(y).for_each(|(g, y)| *g += y);
        let value = 0.5 * y.iter().map(|y| y * y).sum::<f64>() + 0.5 * mu * s;
        Ok((value, grad))
    }

    /// Largest relative mismatch between the adjoint directional derivative
    /// of the penalty objective and a central difference, over random
    /// directions at a random point.
    pub fn gradient_check(
        &self,
        target: &[SpectralField],
        mu: f64,
        beta: f64,
        trials: usize,
        step: f64,
        seed: u64,
    ) -> Result<f64, DeviationError> {
        let n = self.steps() * self.dim();
        let mut rng = stream(seed, 0);
        let y: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal) / (n as f64).sqrt()).collect();
        let (_, g) = self.penalty_objective(&y, target, mu, beta)?;
        let mut worst: f64 = 0.0;
        for _ in 0..trials {
            let d: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let dn = d.iter().map(|x| x * x).sum::<f64>().sqrt();
            let d: Vec<f64> = d.iter().map(|x| x / dn).collect();
            let shifted = |s: f64| y.iter().zip(&d).map(|(y, d)| y + s * d).collect::<Vec<f64>>();
            let (fp, _) = self.penalty_objective(&shifted(step), target, mu, beta)?;
            let (fm, _) = self.penalty_objective(&shifted(-step), target, mu, beta)?;
            let fd = (fp - fm) / (2.0 * step);
            let ad: f64 = g.iter().zip(&d).map(|(g, d)| g * d).sum();
            let err = (fd - ad).abs() / fd.abs().max(ad.abs()).max(f64::MIN_POSITIVE);
            worst = worst.max(err);
        }
        Ok(worst)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptParams {
    /// Admissible `‖X^h − v‖_{𝓔(T)}`, relative to `max(1, ‖v‖_{𝓔(T)})`.
    pub feasibility_tol: f64,
    /// Largest control energy `∫|h|₀²` tried before giving up.
    pub energy_cap: f64,
    pub mu_initial: f64,
    pub mu_growth: f64,
    pub mu_max: f64,
    /// Soft-max sharpness relative to the current largest `|e_m|²`.
    pub softmax_sharpness: f64,
    pub max_inner_iters: usize,
    /// Inner stopping rule, relative to the gradient at the stage start.
    pub inner_rtol: f64,
}

impl Default for OptParams {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-4,
            energy_cap: 1e3,
            mu_initial: 1.0,
            mu_growth: 10.0,
            mu_max: 1e14,
            softmax_sharpness: 20.0,
            max_inner_iters: 400,
            inner_rtol: 1e-9,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct RateDiagnostics {
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub evaluations: usize,
    pub final_mu: f64,
    pub gradient_norm: f64,
    /// `S^{1/2}` of the smooth distance at the returned control.
    pub surrogate_residual: f64,
    pub stop_reason: String,
    /// `(μ, residual, energy)` after every penalty stage.
    pub history: Vec<(f64, f64, f64)>,
}

#[derive(Clone, Debug)]
pub struct RateResult {
    /// `½∫|h*|₀²` when feasible, `+∞` otherwise.
    pub value: f64,
    pub feasible: bool,
    /// Returned control (the best iterate when infeasible).
    pub control: Control,
    pub energy: f64,
    /// Exact `‖X^{h*} − v‖_{𝓔(T)}`.
    pub residual: f64,
    pub tolerance: f64,
    pub diagnostics: RateDiagnostics,
}

fn check_target(map: &SkeletonMap<'_>, v: &Trajectory) -> Result<(), DeviationError> {
    let cfg = map.config();
    if !v.covers_steps(cfg.steps(), cfg.dt) || v.initial().grid() != &cfg.grid {
        return Err(DeviationError::Mismatch(format!(
            "target must record all {} solver states on the config grid",
            cfg.steps() + 1
        )));
    }
    Ok(())
}

/// `I(v) = ½ inf{∫|h|₀² : X^h = v}` by quadratic penalty with continuation
/// in `μ` and an L-BFGS inner solve.
pub fn rate_function(
    v: &Trajectory,
    u0: &Trajectory,
    cfg: &SimConfig,
    params: &OptParams,
) -> Result<RateResult, DeviationError> {
    let map = SkeletonMap::new(cfg, u0)?;
    check_target(&map, v)?;
    let times = map.times();
    let target = &v.fields;
    let target_norm = energy_norm_of(&times, target);
    let tol = params.feasibility_tol * target_norm.max(1.0);
    let n = map.steps() * map.dim();
    let mut y = vec![0.0; n];
    let mut diag = RateDiagnostics::default();

    let finish = |y: &[f64], diag: RateDiagnostics, feasible: bool| -> Result<RateResult, DeviationError> {
        let control = map.control_from_scaled(y)?;
        let xs = map.forward(&control)?;
        let errors: Vec<SpectralField> = xs.iter().zip(target).map(|(x, v)| x.sub(v)).collect();
        let residual = energy_norm_of(&times, &errors);
        let energy = control.energy();
        Ok(RateResult {
            value: if feasible { 0.5 * energy } else { f64::INFINITY },
            feasible,
            control,
            energy,
            residual,
            tolerance: tol,
            diagnostics: diag,
        })
    };

    // zero control already reaches v
    if target_norm <= tol {
        diag.stop_reason = "zero control is feasible".into();
        return finish(&y, diag, true);
    }

    let mut mu = params.mu_initial;
    loop {
        diag.outer_iterations += 1;
        let start: Vec<SpectralField> = {
            let xs = map.forward(&map.control_from_scaled(&y)?)?;
            xs.iter().zip(target).map(|(x, v)| x.sub(v)).collect()
        };
        let amax = start.iter().map(|e| e.h_norm_sq()).fold(0.0, f64::max);
        let beta = params.softmax_sharpness / amax.max(f64::MIN_POSITIVE);
        let (_, g0) = map.penalty_objective(&y, target, mu, beta)?;
        let g0n = g0.iter().map(|g| g * g).sum::<f64>().sqrt();
        let opts = LbfgsOptions {
            max_iters: params.max_inner_iters,
            gtol: params.inner_rtol * g0n.max(1e-300),
            ..LbfgsOptions::default()
        };
        let out = minimize(|y| map.penalty_objective(y, target, mu, beta), y.clone(), &opts)?;
        diag.inner_iterations += out.iterations;
        diag.evaluations += out.evaluations + 1;
        diag.gradient_norm = out.grad_norm;
        diag.final_mu = mu;
        y = out.x;

        let control = map.control_from_scaled(&y)?;
        let xs = map.forward(&control)?;
        let errors: Vec<SpectralField> = xs.iter().zip(target).map(|(x, v)| x.sub(v)).collect();
        let residual = energy_norm_of(&times, &errors);
        let energy = control.energy();
        diag.surrogate_residual = map.surrogate(&errors, beta).0.max(0.0).sqrt();
        diag.history.push((mu, residual, energy));

        if residual <= tol {
            diag.stop_reason = format!("feasible ({})", out.reason);
            return finish(&y, diag, true);
        }
        if energy > params.energy_cap {
            diag.stop_reason = "energy cap reached".into();
            return finish(&y, diag, false);
        }
        if mu * params.mu_growth > params.mu_max {
            diag.stop_reason = "penalty limit reached".into();
            return finish(&y, diag, false);
        }
        mu *= params.mu_growth;
    }
}

/// `C = sup{‖X^h‖²_{𝓔(T)} : ∫|h|₀² = 1}` and a maximizer, so that
/// `inf{I(v) : ‖v‖_{𝓔(T)} ≥ r} = r² / (2C)`.
#[derive(Clone, Debug)]
pub struct ShellConstant {
    pub value: f64,
    pub maximizer: Control,
    pub iterations: usize,
    pub converged: bool,
}

impl ShellConstant {
    /// Smallest rate over the exterior of the `r`-ball.
    pub fn min_rate(&self, r: f64) -> f64 {
        r * r / (2.0 * self.value)
    }
}

/// Power iteration `y ← ∇F(y)/|∇F(y)|` on the convex, 2-homogeneous
/// `F(y) = ‖X^{h(y)}‖²_{𝓔(T)}`; `F(y)` increases monotonically.
pub fn shell_constant(
    cfg: &SimConfig,
    u0: &Trajectory,
    max_iters: usize,
    rtol: f64,
) -> Result<ShellConstant, DeviationError> {
    let map = SkeletonMap::new(cfg, u0)?;
    let times = map.times();
    let n = map.steps() * map.dim();
    if n == 0 {
        return Err(DeviationError::Parameter("no control degrees of freedom".into()));
    }
    let dt = cfg.dt;
    let mut y = vec![1.0 / (n as f64).sqrt(); n];
    let mut value = 0.0;
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..max_iters {
        iterations = it + 1;
        let xs = map.forward(&map.control_from_scaled(&y)?)?;
        let f = energy_norm_of(&times, &xs).powi(2);
        let last = xs.len() - 1;
        let peak = (0..xs.len()).max_by(|&a, &b| xs[a].h_norm_sq().total_cmp(&xs[b].h_norm_sq())).expect("nonempty");
        let seeds: Vec<SpectralField> = xs
            .iter()
            .enumerate()
            .map(|(m, x)| {
                let mut g = if m < last { x.stokes().scaled(2.0 * dt) } else { SpectralField::zeros(x.grid()) };
                if m == peak {
                    g.axpy(2.0, x);
                }
                g
            })
            .collect();
        let mut grad = map.pullback(&seeds)?;
        map.to_scaled_gradient(&mut grad);
        let gn = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gn == 0.0 {
            value = f;
            break;
        }
        let change = (f - value).abs();
        value = f;
        y = grad.iter().map(|g| g / gn).collect();
        if it > 0 && change <= rtol * f {
            converged = true;
            break;
        }
    }
    // value belongs to the previous iterate; re-evaluate at the returned one
    let maximizer = map.control_from_scaled(&y)?;
    let xs = map.forward(&maximizer)?;
    let final_value = energy_norm_of(&times, &xs).powi(2) / maximizer.energy();
    Ok(ShellConstant { value: final_value.max(value), maximizer, iterations, converged })
}
