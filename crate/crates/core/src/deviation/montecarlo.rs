use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::energy::{dyadic_increment_stat, energy_norm, energy_norm_of};
use super::rate::shell_constant;
use super::DeviationError;
use crate::noise::{Control, WienerPath};
use crate::rng::stream;
use crate::solvers::{
    loglog_factor, solve_deterministic, solve_skeleton, solve_snse_with_path, solve_tilde_z_with_path, SimConfig,
    Trajectory, TrajectoryKind,
};
use crate::spectral::SpectralField;

const Z95: f64 = 1.96;

/// Wilson score interval for `hits` successes out of `n`.
pub fn wilson_interval(hits: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = hits as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    let lo = if hits == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if hits == n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityEstimate {
    pub samples: usize,
    pub hits: usize,
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
    /// One-sided 95% upper bound `1 − 0.05^{1/n}`, set when nothing was hit.
    pub zero_hit_bound: Option<f64>,
}

impl ProbabilityEstimate {
    pub fn from_counts(hits: usize, samples: usize) -> Self {
        let estimate = if samples == 0 { 0.0 } else { hits as f64 / samples as f64 };
        let (lo, hi) = wilson_interval(hits, samples, Z95);
        let zero_hit_bound = (hits == 0 && samples > 0).then(|| 1.0 - 0.05f64.powf(1.0 / samples as f64));
        Self { samples, hits, estimate, lo, hi, zero_hit_bound }
    }

    pub fn std_error(&self) -> f64 {
        let p = self.estimate;
        (p * (1.0 - p) / self.samples.max(1) as f64).sqrt()
    }

    /// `ln P̂`, or the log of the zero-hit bound (flagged `true`) so the value stays finite.
    pub fn log_value(&self) -> (f64, bool) {
        match self.zero_hit_bound {
            Some(b) => (b.ln(), true),
            None => (self.estimate.ln(), false),
        }
    }
}

/// The noise realisation of Monte Carlo sample `index`.
pub fn sample_path(cfg: &SimConfig, seed: u64, index: u64) -> WienerPath {
    WienerPath::sample(&cfg.noise, cfg.dt, cfg.steps(), &mut stream(seed, index))
}

/// Runs `f` on samples `0..n` in parallel and returns the results in sample order.
pub(crate) fn per_sample<R: Send, E: Send>(n: usize, f: impl Fn(u64) -> Result<R, E> + Sync) -> Result<Vec<R>, E> {
    (0..n as u64).into_par_iter().map(|i| f(i)).collect()
}

/// Indicator means of several events over one common set of trajectories.
pub fn mc_probabilities(
    events: &[&(dyn Fn(&Trajectory) -> bool + Sync)],
    cfg: &SimConfig,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<ProbabilityEstimate>, DeviationError> {
    if n_samples == 0 {
        return Err(DeviationError::Parameter("need at least one sample".into()));
    }
    let flags = per_sample(n_samples, |i| {
        let traj = solve_snse_with_path(cfg, &sample_path(cfg, seed, i))?;
        Ok::<_, DeviationError>(events.iter().map(|e| e(&traj)).collect::<Vec<bool>>())
    })?;
    Ok((0..events.len())
        .map(|k| ProbabilityEstimate::from_counts(flags.iter().filter(|f| f[k]).count(), n_samples))
        .collect())
}

/// Probability of `event` for the stochastic system in `cfg`; sample `i`
/// is driven by stream `(seed, i)`.
pub fn mc_probability(
    event: impl Fn(&Trajectory) -> bool + Sync,
    cfg: &SimConfig,
    n_samples: usize,
    seed: u64,
) -> Result<ProbabilityEstimate, DeviationError> {
    Ok(mc_probabilities(&[&event], cfg, n_samples, seed)?.remove(0))
}

/// `(u − u⁰) · factor` on the common recording grid.
pub(crate) fn scaled_difference(u: &Trajectory, u0: &Trajectory, factor: f64) -> Result<Trajectory, DeviationError> {
    if u.times.len() != u0.times.len() || u.times.iter().zip(&u0.times).any(|(a, b)| (a - b).abs() > 1e-12 * a.abs().max(1.0)) {
        return Err(DeviationError::Mismatch("trajectories recorded on different times".into()));
    }
    let fields = u.fields.iter().zip(&u0.fields).map(|(a, b)| a.sub(b).scaled(factor)).collect();
    Ok(Trajectory::from_fields(TrajectoryKind::Fluctuation, u.times.clone(), fields)?)
}

/// Deterministic companion run with every step recorded.
pub(crate) fn deterministic_companion(cfg: &SimConfig) -> Result<(SimConfig, Trajectory), DeviationError> {
    let base = cfg.clone().with_epsilon(0.0).with_stride(1);
    let u0 = solve_deterministic(&base)?;
    Ok((base, u0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalingSpeed {
    /// `a(ε) = (2ε log log(1/ε))^{1/2}`.
    LogLog,
    /// `a(ε) = ε^γ` with `γ ∈ (0, 1/2)`.
    Power { gamma: f64 },
}

impl ScalingSpeed {
    pub fn at(&self, epsilon: f64) -> Result<f64, DeviationError> {
        match *self {
            ScalingSpeed::LogLog => Ok((epsilon * loglog_factor(epsilon)?).sqrt()),
            ScalingSpeed::Power { gamma } => {
                if !(gamma > 0.0 && gamma < 0.5) {
                    return Err(DeviationError::Parameter(format!("speed exponent {gamma} must lie in (0, 1/2)")));
                }
                Ok(epsilon.powf(gamma))
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScalingConfig {
    pub radii: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub speed: ScalingSpeed,
    pub samples: usize,
    pub seed: u64,
    /// Upper end of the admissible noise range, when known.
    pub eps_max: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScalingRow {
    pub epsilon: f64,
    pub speed: f64,
    pub radius: f64,
    pub probability: ProbabilityEstimate,
    /// `a(ε)² log P̂`, or `a(ε)²` times the log of the zero-hit bound.
    pub scaled_log: f64,
    pub one_sided: bool,
    /// `inf{I(v) : ‖v‖_{𝓔(T)} ≥ r}`.
    pub min_rate: f64,
    /// `a(ε)² log P̂ + inf I`.
    pub gap: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScalingTrend {
    pub radius: f64,
    /// Least-squares slope of `|gap|` against the position along decreasing `ε`.
    pub slope: f64,
    /// Negative slope and a smaller `|gap|` at the smallest `ε` than at the largest.
    pub shrinks: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    pub shell_constant: f64,
    pub trends: Vec<ScalingTrend>,
}

fn check_epsilons(epsilons: &[f64], eps_max: Option<f64>) -> Result<(), DeviationError> {
    if epsilons.is_empty() {
        return Err(DeviationError::Parameter("empty epsilon grid".into()));
    }
    for &e in epsilons {
        if !(e > 0.0 && e < 1.0) {
            return Err(DeviationError::Parameter(format!("epsilon {e} outside (0, 1)")));
        }
        if let Some(m) = eps_max {
            if e >= m {
                return Err(DeviationError::Parameter(format!("epsilon {e} is not below the threshold {m}")));
            }
        }
    }
    Ok(())
}

fn slope(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    if ys.len() < 2 {
        return 0.0;
    }
    let xm = (n - 1.0) / 2.0;
    let ym = ys.iter().sum::<f64>() / n;
    let sxy: f64 = ys.iter().enumerate().map(|(i, y)| (i as f64 - xm) * (y - ym)).sum();
    let sxx: f64 = (0..ys.len()).map(|i| (i as f64 - xm).powi(2)).sum();
    sxy / sxx
}

/// Tabulates `a(ε)² log P(‖v^ε‖_{𝓔(T)} ≥ r)` for `v^ε = (a(ε)/√ε)(u^ε − u⁰)`
/// against `−inf{I : ‖v‖ ≥ r}`. All `ε` share the noise samples.
pub fn mdp_scaling_probe(cfg: &SimConfig, probe: &ScalingConfig) -> Result<ScalingReport, DeviationError> {
    check_epsilons(&probe.epsilons, probe.eps_max)?;
    if probe.radii.iter().any(|r| !(*r >= 0.0)) {
        return Err(DeviationError::Parameter("radii must be nonnegative".into()));
    }
    if probe.samples == 0 {
        return Err(DeviationError::Parameter("need at least one sample".into()));
    }
    let (base, u0) = deterministic_companion(cfg)?;
    let shell = shell_constant(&base, &u0, 2000, 1e-12)?;
    let mut rows = Vec::new();
    for &eps in &probe.epsilons {
        let a = probe.speed.at(eps)?;
        let run = base.clone().with_epsilon(eps);
        let factor = a / eps.sqrt();
        let norms = per_sample(probe.samples, |i| {
            let u = solve_snse_with_path(&run, &sample_path(&run, probe.seed, i))?;
            Ok::<_, DeviationError>(energy_norm(&scaled_difference(&u, &u0, factor)?))
        })?;
        for &r in &probe.radii {
            let hits = norms.iter().filter(|&&n| n >= r).count();
            let probability = ProbabilityEstimate::from_counts(hits, probe.samples);
            let (log_p, one_sided) = probability.log_value();
            let scaled_log = a * a * log_p;
            let min_rate = shell.min_rate(r);
            rows.push(ScalingRow { epsilon: eps, speed: a, radius: r, probability, scaled_log, one_sided, min_rate, gap: scaled_log + min_rate });
        }
    }
    let trends = probe
        .radii
        .iter()
        .map(|&r| {
            let mut sel: Vec<&ScalingRow> = rows.iter().filter(|row| row.radius == r).collect();
            sel.sort_by(|a, b| b.epsilon.total_cmp(&a.epsilon));
            let gaps: Vec<f64> = sel.iter().map(|row| row.gap.abs()).collect();
            let s = slope(&gaps);
            let shrinks = s < 0.0 && gaps.last() < gaps.first();
            ScalingTrend { radius: r, slope: s, shrinks }
        })
        .collect();
    Ok(ScalingReport { rows, shell_constant: shell.value, trends })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FWConfig {
    /// `𝓔(T)`-distance threshold `ρ`.
    pub rho: f64,
    /// Closeness of the rescaled noise to `∫h`, in `sup_t |·|₀`.
    pub eta: f64,
    /// Target exponent `R` of the bound `exp(−2R log log(1/ε))`.
    pub rate_exponent: f64,
    /// Threshold for the dyadic increment statistic of the shifted process.
    pub increment_threshold: f64,
    pub depth: u32,
    pub epsilons: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    pub eps_max: Option<f64>,
}

impl FWConfig {
    pub fn validate(&self) -> Result<(), DeviationError> {
        for (name, v) in [
            ("rho", self.rho),
            ("eta", self.eta),
            ("rate exponent", self.rate_exponent),
            ("increment threshold", self.increment_threshold),
        ] {
            if !(v > 0.0) {
                return Err(DeviationError::Parameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.samples == 0 {
            return Err(DeviationError::Parameter("need at least one sample".into()));
        }
        check_epsilons(&self.epsilons, self.eps_max)?;
        for &e in &self.epsilons {
            loglog_factor(e)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FWRow {
    pub epsilon: f64,
    /// `2 log log(1/ε)`.
    pub loglog: f64,
    /// `P(‖Z^ε − X^h‖ > ρ, sup_t |W(t)/√(2 log log(1/ε)) − ∫₀ᵗh|₀ < η)`.
    pub joint: ProbabilityEstimate,
    pub noise_close: ProbabilityEstimate,
    pub deviation: ProbabilityEstimate,
    /// `P(dyadic increment statistic of the shifted process > β)`.
    pub increment: ProbabilityEstimate,
    pub bound: f64,
    pub below_bound: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FWReport {
    pub rows: Vec<FWRow>,
    pub skeleton_norm: f64,
    /// Whether the joint estimate sits below the bound at the smallest `ε`.
    pub below_at_smallest: bool,
}

/// `sup_m |W(t_m)·scale − H(t_m)|₀`.
fn noise_distance(path: &WienerPath, scale: f64, integral: &[Vec<f64>], lambdas: &[f64]) -> f64 {
    path.cumulative()
        .iter()
        .zip(integral)
        .map(|(w, h)| w.iter().zip(h).zip(lambdas).map(|((w, h), l)| (w * scale - h).powi(2) / l).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

/// Estimates the probability that `Z^ε = (u^ε − u⁰)/√(2ε log log(1/ε))`
/// strays from the skeleton `X^h` while the rescaled noise stays near `∫h`.
pub fn fw_conditional_probe(h: &Control, fw: &FWConfig, cfg: &SimConfig) -> Result<FWReport, DeviationError> {
    fw.validate()?;
    let (base, u0) = deterministic_companion(cfg)?;
    let skeleton = solve_skeleton(h, &u0, &base)?;
    let integral = h.integral();
    let lambdas = base.noise.lambdas();
    let mut rows = Vec::new();
    for &eps in &fw.epsilons {
        let ll = loglog_factor(eps)?;
        let run = base.clone().with_epsilon(eps);
        let flags = per_sample(fw.samples, |i| {
            let path = sample_path(&run, fw.seed, i);
            let u = solve_snse_with_path(&run, &path)?;
            let z = scaled_difference(&u, &u0, 1.0 / (eps * ll).sqrt())?;
            let dev = energy_norm_of(
                &z.times,
                &z.fields.iter().zip(&skeleton.fields).map(|(a, b)| a.sub(b)).collect::<Vec<SpectralField>>(),
            );
            let close = noise_distance(&path, 1.0 / ll.sqrt(), &integral, &lambdas) < fw.eta;
            let shifted = solve_tilde_z_with_path(h, &u, &u0, eps, &path, &run)?;
            let incr = dyadic_increment_stat(&shifted, fw.depth)? > fw.increment_threshold;
            Ok::<_, DeviationError>([dev > fw.rho && close, close, dev > fw.rho, incr])
        })?;
        let count = |k: usize| ProbabilityEstimate::from_counts(flags.iter().filter(|f| f[k]).count(), fw.samples);
        let joint = count(0);
        let bound = (-fw.rate_exponent * ll).exp();
        let below_bound = joint.estimate <= bound;
        rows.push(FWRow {
            epsilon: eps,
            loglog: ll,
            joint,
            noise_close: count(1),
            deviation: count(2),
            increment: count(3),
            bound,
            below_bound,
        });
    }
    let smallest = rows.iter().min_by(|a, b| a.epsilon.total_cmp(&b.epsilon)).expect("nonempty grid");
    Ok(FWReport { below_at_smallest: smallest.below_bound, skeleton_norm: energy_norm(&skeleton), rows })
}
