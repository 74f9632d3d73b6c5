use super::stepper::{navier_stokes_drift, stochastic_increment, Stepper};
use super::trajectory::{Provenance, Recorder, Trajectory};
use super::{SimConfig, SolverError, TrajectoryKind};
use crate::noise::{Control, WienerPath};
use crate::rng::stream;
use crate::spectral::{bilinear, SpectralField};

/// `2 log log(1/ε)`, defined for `ε ∈ (0, e^{−e})`.
pub fn loglog_factor(epsilon: f64) -> Result<f64, SolverError> {
    let limit = (-std::f64::consts::E).exp();
    if !(epsilon > 0.0 && epsilon < limit) {
        return Err(SolverError::Parameter(format!("epsilon = {epsilon} must lie in (0, e^(-e)) = (0, {limit:.6})")));
    }
    Ok(2.0 * (1.0 / epsilon).ln().ln())
}

fn guard(u: &SpectralField, step: usize, threshold: f64) -> Result<(), SolverError> {
    let n = u.h_norm_sq().sqrt();
    if !n.is_finite() || n > threshold {
        return Err(SolverError::Blowup { step, norm: n });
    }
    Ok(())
}

fn check_path(cfg: &SimConfig, path: &WienerPath) -> Result<(), SolverError> {
    let steps = cfg.steps();
    if path.steps() != steps || path.dim() != cfg.noise.num_directions() {
        return Err(SolverError::Mismatch(format!(
            "noise path has {}×{} increments, solver needs {}×{}",
            path.steps(),
            path.dim(),
            steps,
            cfg.noise.num_directions()
        )));
    }
    if (path.dt() - cfg.dt).abs() > 1e-12 * cfg.dt {
        return Err(SolverError::Mismatch(format!("noise path dt {} differs from solver dt {}", path.dt(), cfg.dt)));
    }
    Ok(())
}

fn check_companion(cfg: &SimConfig, traj: &Trajectory, what: &str) -> Result<(), SolverError> {
    if traj.initial().grid() != &cfg.grid {
        return Err(SolverError::Mismatch(format!("{what} trajectory lives on a different grid")));
    }
    if !traj.covers_steps(cfg.steps(), cfg.dt) {
        return Err(SolverError::Mismatch(format!(
            "{what} trajectory must record every solver step (need {} states, found {})",
            cfg.steps() + 1,
            traj.len()
        )));
    }
    Ok(())
}

fn check_control(cfg: &SimConfig, h: &Control) -> Result<(), SolverError> {
    if h.steps() != cfg.steps() || h.dim() != cfg.noise.num_directions() {
        return Err(SolverError::Mismatch(format!(
            "control has {}×{} values, solver needs {}×{}",
            h.steps(),
            h.dim(),
            cfg.steps(),
            cfg.noise.num_directions()
        )));
    }
    Ok(())
}

/// Integrates the stochastic system driven by `path` (deterministic when `path` is `None`),
/// calling `observe(step, t, u)` on the initial state and after every step.
pub fn integrate_snse(
    cfg: &SimConfig,
    path: Option<&WienerPath>,
    observe: &mut dyn FnMut(usize, f64, &SpectralField),
) -> Result<SpectralField, SolverError> {
    cfg.validate()?;
    if let Some(p) = path {
        check_path(cfg, p)?;
    }
    let stepper = Stepper::new(&cfg.grid, cfg.dt);
    let threshold = cfg.blowup_threshold();
    let mut u = cfg.initial.clone();
    observe(0, 0.0, &u);
    for m in 0..cfg.steps() {
        let t = cfg.time(m);
        let f = cfg.forcing.at(t);
        let drift = navier_stokes_drift(&u, f.as_ref(), cfg.nonlinear)?;
        let noise = match path {
            Some(p) => stochastic_increment(&cfg.noise, cfg.epsilon, t, &u, p.increment(m))?,
            None => None,
        };
        u = stepper.advance(&u, drift.as_ref(), noise.as_ref());
        guard(&u, m + 1, threshold)?;
        observe(m + 1, cfg.time(m + 1), &u);
    }
    Ok(u)
}

fn record(
    kind: TrajectoryKind,
    cfg: &SimConfig,
    provenance: Provenance,
    run: impl FnOnce(&mut dyn FnMut(usize, f64, &SpectralField)) -> Result<SpectralField, SolverError>,
) -> Result<Trajectory, SolverError> {
    let mut rec = Recorder::new(kind, cfg.record_stride);
    let dt = cfg.dt;
    run(&mut |step, t, u| {
        if step > 0 {
            rec.integrate_to(dt);
        }
        rec.observe(t, u);
    })?;
    Ok(rec.finish(provenance))
}

pub fn solve_deterministic(cfg: &SimConfig) -> Result<Trajectory, SolverError> {
    record(TrajectoryKind::Deterministic, cfg, Provenance::default(), |obs| integrate_snse(cfg, None, obs))
}

/// Stochastic solution on the noise realisation drawn from stream `(seed, 0)`.
pub fn solve_snse(cfg: &SimConfig, seed: u64) -> Result<Trajectory, SolverError> {
    let path = WienerPath::sample(&cfg.noise, cfg.dt, cfg.steps(), &mut stream(seed, 0));
    let mut traj = solve_snse_with_path(cfg, &path)?;
    traj.provenance.seed = Some(seed);
    Ok(traj)
}

pub fn solve_snse_with_path(cfg: &SimConfig, path: &WienerPath) -> Result<Trajectory, SolverError> {
    record(TrajectoryKind::Stochastic, cfg, Provenance::default(), |obs| integrate_snse(cfg, Some(path), obs))
}

/// Integrates `dX + AX dt = −B(X, u⁰) dt − B(u⁰, X) dt + σ(t, u⁰) h dt`, `X(0) = 0`.
pub fn integrate_skeleton(
    h: &Control,
    u0: &Trajectory,
    cfg: &SimConfig,
    observe: &mut dyn FnMut(usize, f64, &SpectralField),
) -> Result<SpectralField, SolverError> {
    cfg.validate()?;
    check_companion(cfg, u0, "deterministic")?;
    check_control(cfg, h)?;
    let stepper = Stepper::new(&cfg.grid, cfg.dt);
    let mut x = SpectralField::zeros(&cfg.grid);
    let threshold = cfg.blowup_threshold();
    observe(0, 0.0, &x);
    for m in 0..cfg.steps() {
        let t = cfg.time(m);
        let base = &u0.fields[m];
        let mut drift = cfg.noise.sigma_apply(t, base, h.value(m))?;
        if cfg.nonlinear {
            drift.axpy(-1.0, &bilinear(&x, base)?);
            drift.axpy(-1.0, &bilinear(base, &x)?);
        }
        x = stepper.advance(&x, Some(&drift), None);
        guard(&x, m + 1, threshold)?;
        observe(m + 1, cfg.time(m + 1), &x);
    }
    Ok(x)
}

pub fn solve_skeleton(h: &Control, u0: &Trajectory, cfg: &SimConfig) -> Result<Trajectory, SolverError> {
    record(TrajectoryKind::Skeleton, cfg, Provenance::default(), |obs| integrate_skeleton(h, u0, cfg, obs))
}

/// Integrates the shifted process
/// `dZ = (−AZ − B(u^ε, Z) − B(Z, u⁰) + σ̃(t, Z) h) dt + (2 log log(1/ε))^{−1/2} σ̃(t, Z) dW`
/// with `σ̃(t, z) = σ(t, (2ε log log(1/ε))^{1/2} z + u⁰(t))`.
pub fn integrate_tilde_z(
    h: &Control,
    u_eps: &Trajectory,
    u0: &Trajectory,
    epsilon: f64,
    path: &WienerPath,
    cfg: &SimConfig,
    observe: &mut dyn FnMut(usize, f64, &SpectralField),
) -> Result<SpectralField, SolverError> {
    let ll = loglog_factor(epsilon)?;
    cfg.validate()?;
    check_companion(cfg, u0, "deterministic")?;
    check_companion(cfg, u_eps, "stochastic")?;
    check_control(cfg, h)?;
    check_path(cfg, path)?;
    let stepper = Stepper::new(&cfg.grid, cfg.dt);
    let (shift, noise_scale) = ((epsilon * ll).sqrt(), 1.0 / ll.sqrt());
    let threshold = cfg.blowup_threshold();
    let model = &cfg.noise;
    let mut z = SpectralField::zeros(&cfg.grid);
    observe(0, 0.0, &z);
    for m in 0..cfg.steps() {
        let t = cfg.time(m);
        let base = &u0.fields[m];
        let mut arg = base.clone();
        arg.axpy(shift, &z);
        let mut drift = model.sigma_apply(t, &arg, h.value(m))?;
        if cfg.nonlinear {
            drift.axpy(-1.0, &bilinear(&u_eps.fields[m], &z)?);
            drift.axpy(-1.0, &bilinear(&z, base)?);
        }
        let mut c = model.sigma_coefficients(t, &arg, path.increment(m))?;
        c.iter_mut().for_each(|x| *x *= noise_scale);
        let noise = model.field_from_coefficients(&c);
        z = stepper.advance(&z, Some(&drift), Some(&noise));
        guard(&z, m + 1, threshold)?;
        observe(m + 1, cfg.time(m + 1), &z);
    }
    Ok(z)
}

pub fn solve_tilde_z_with_path(
    h: &Control,
    u_eps: &Trajectory,
    u0: &Trajectory,
    epsilon: f64,
    path: &WienerPath,
    cfg: &SimConfig,
) -> Result<Trajectory, SolverError> {
    record(TrajectoryKind::ShiftedProcess, cfg, Provenance::default(), |obs| {
        integrate_tilde_z(h, u_eps, u0, epsilon, path, cfg, obs)
    })
}

/// Shifted process on the noise realisation drawn from stream `(seed, 0)`.
pub fn solve_tilde_z(
    h: &Control,
    u_eps: &Trajectory,
    u0: &Trajectory,
    epsilon: f64,
    seed: u64,
    cfg: &SimConfig,
) -> Result<Trajectory, SolverError> {
    loglog_factor(epsilon)?;
    let path = WienerPath::sample(&cfg.noise, cfg.dt, cfg.steps(), &mut stream(seed, 0));
    let mut traj = solve_tilde_z_with_path(h, u_eps, u0, epsilon, &path, cfg)?;
    traj.provenance.seed = Some(seed);
    Ok(traj)
}
