use serde::{Deserialize, Serialize};

use super::constants::{epsilon_thresholds, moment_order_threshold, ConstantsLedger};
use super::energy::energy_norm;
use super::montecarlo::{deterministic_companion, per_sample, sample_path, scaled_difference};
use super::rate::shell_constant;
use super::DeviationError;
use crate::noise::Control;
use crate::solvers::{loglog_factor, solve_skeleton, solve_snse_with_path, solve_tilde_z_with_path, Trajectory};

fn pow(x: f64, p: f64) -> f64 {
    if p.fract() == 0.0 && p.abs() < i32::MAX as f64 {
        x.powi(p as i32)
    } else {
        x.powf(p)
    }
}

/// `sup_m |u_m|^{2p} + Σ_{m<M} |u_m|^{2(p−1)} ‖u_m‖² (t_{m+1} − t_m)`.
pub fn power_functional(traj: &Trajectory, p: f64) -> f64 {
    let mut sup: f64 = 0.0;
    let mut int = 0.0;
    for (m, u) in traj.fields.iter().enumerate() {
        let h = u.h_norm_sq();
        sup = sup.max(pow(h, p));
        if m + 1 < traj.len() {
            int += pow(h, p - 1.0) * u.v_norm_sq() * (traj.times[m + 1] - traj.times[m]);
        }
    }
    sup + int
}

/// `sup_m ‖u_m‖^{2p}`.
fn sup_v_power(traj: &Trajectory, p: f64) -> f64 {
    traj.fields.iter().map(|u| pow(u.v_norm_sq(), p)).fold(0.0, f64::max)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentConfig {
    pub epsilons: Vec<f64>,
    /// Moment orders `p ≥ 1`.
    pub p_list: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    /// Pinned constants; derived from the noise model when absent.
    pub ledger: Option<ConstantsLedger>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentRow {
    pub quantity: String,
    pub p: f64,
    pub epsilon: f64,
    pub mean: f64,
    pub std_error: f64,
    /// Whether `ε` lies in the range where the bound is stated.
    pub admissible: bool,
    pub threshold: f64,
}

/// `ln y = ln c + α ln ε` by least squares.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    pub exponent: f64,
    pub constant: f64,
    pub exponent_std_error: f64,
    pub points: usize,
}

/// Least-squares power law through the points with positive `y`.
pub fn fit_power_law(eps: &[f64], y: &[f64]) -> Option<PowerFit> {
    let pts: Vec<(f64, f64)> = eps.iter().zip(y).filter(|(e, y)| **e > 0.0 && **y > 0.0).map(|(e, y)| (e.ln(), y.ln())).collect();
    let n = pts.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let xm = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - xm).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - xm) * (p.1 - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let se = if n > 2 {
        let rss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
        (rss / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Some(PowerFit { exponent: slope, constant: intercept.exp(), exponent_std_error: se, points: n })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentFit {
    pub quantity: String,
    pub p: f64,
    /// Power of `ε` in the stated bound.
    pub stated_exponent: f64,
    pub fit: Option<PowerFit>,
    /// `max_ε mean / ε^{stated}` over admissible rows.
    pub implied_constant: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SkeletonBound {
    pub energy: f64,
    /// `sup|X^h|² + ∫‖X^h‖²`.
    pub energy_norm_sq: f64,
    pub shell_constant: f64,
    /// `∫|h|₀² · C`, which dominates the previous line.
    pub bound: f64,
    pub within: bool,
    /// `(p, sup‖X^h‖^{2p})`.
    pub sup_v_powers: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentReport {
    pub rows: Vec<MomentRow>,
    pub fits: Vec<MomentFit>,
    /// `sup|u⁰|² + ∫‖u⁰‖²`.
    pub k6: f64,
    /// `sup|u⁰|² · ∫‖u⁰‖²`.
    pub k7: f64,
    /// `(p, sup‖u⁰‖^{2p})`.
    pub u0_sup_v_powers: Vec<(f64, f64)>,
    pub skeleton: Option<SkeletonBound>,
}

struct Quantity {
    name: &'static str,
    p: f64,
    stated: f64,
    threshold: f64,
}

/// Empirical left-hand sides of the moment bounds along an `ε` grid, with
/// power-law fits against the stated `ε`-dependence. The shifted process
/// uses the control `h` (zero when absent). Every `ε` reuses the same noise
/// samples.
pub fn moment_bound_suite(
    cfg: &crate::solvers::SimConfig,
    mc: &MomentConfig,
    h: Option<&Control>,
) -> Result<MomentReport, DeviationError> {
    if mc.samples == 0 || mc.epsilons.is_empty() {
        return Err(DeviationError::Parameter("need samples and a nonempty epsilon grid".into()));
    }
    if mc.p_list.iter().any(|&p| !(p >= 1.0)) {
        return Err(DeviationError::Parameter("moment orders must be at least 1".into()));
    }
    if mc.epsilons.iter().any(|&e| !(e > 0.0)) {
        return Err(DeviationError::Parameter("epsilon must be positive".into()));
    }
    let (base, u0) = deterministic_companion(cfg)?;
    let ledger = match &mc.ledger {
        Some(l) => l.clone(),
        None => ConstantsLedger::from_model(&base.noise, &base.forcing, base.t_end),
    };
    let th1 = epsilon_thresholds(&ledger, 1.0)?;
    let zero = Control::zero(&base.noise, base.t_end, base.steps());
    let control = h.unwrap_or(&zero);

    let mut quantities = vec![
        Quantity { name: "energy", p: 1.0, stated: 1.0, threshold: th1.energy },
        Quantity { name: "quartic", p: 2.0, stated: 1.0, threshold: th1.energy },
        Quantity { name: "difference", p: 1.0, stated: 2.0, threshold: th1.energy },
        Quantity { name: "difference_sup", p: 1.0, stated: 2.0, threshold: th1.energy },
        Quantity { name: "shifted_second", p: 1.0, stated: 0.0, threshold: th1.eps1 },
        Quantity { name: "shifted_fourth", p: 2.0, stated: 0.0, threshold: th1.eps0 },
    ];
    for &p in &mc.p_list {
        if p >= 2.0 {
            quantities.push(Quantity { name: "u_moment", p, stated: 0.0, threshold: moment_order_threshold(p) });
        }
        let eps2 = epsilon_thresholds(&ledger, p)?.eps2;
        quantities.push(Quantity { name: "shifted_moment", p, stated: 0.0, threshold: eps2 });
        quantities.push(Quantity { name: "curl_sup", p, stated: 1.0, threshold: th1.energy });
    }

    let mut rows = Vec::new();
    for &eps in &mc.epsilons {
        let run = base.clone().with_epsilon(eps);
        let ll = loglog_factor(eps).ok();
        let values = per_sample(mc.samples, |i| {
            let path = sample_path(&run, mc.seed, i);
            let u = solve_snse_with_path(&run, &path)?;
            let diff = scaled_difference(&u, &u0, 1.0)?;
            let z = match ll {
                Some(_) if h.is_some() => Some(solve_tilde_z_with_path(control, &u, &u0, eps, &path, &run)?),
                Some(ll) => Some(scaled_difference(&u, &u0, 1.0 / (eps * ll).sqrt())?),
                None => None,
            };
            let v: Vec<Option<f64>> = quantities
                .iter()
                .map(|q| match q.name {
                    "energy" => Some(power_functional(&u, 1.0)),
                    "quartic" => Some(power_functional(&u, 2.0)),
                    "difference" => Some(power_functional(&diff, 1.0)),
                    "difference_sup" => Some(diff.sup_h_power(1.0)),
                    "u_moment" => Some(power_functional(&u, q.p)),
                    "curl_sup" => Some(sup_v_power(&u, q.p)),
                    "shifted_second" | "shifted_fourth" | "shifted_moment" => {
                        z.as_ref().map(|z| power_functional(z, q.p))
                    }
                    _ => unreachable!("unknown quantity"),
                })
                .collect();
            Ok::<_, DeviationError>(v)
        })?;
        for (k, q) in quantities.iter().enumerate() {
            let xs: Vec<f64> = values.iter().filter_map(|v| v[k]).collect();
            if xs.is_empty() {
                continue;
            }
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
            let ll_ok = !q.name.starts_with("shifted") || ll.is_some();
            rows.push(MomentRow {
                quantity: q.name.to_string(),
                p: q.p,
                epsilon: eps,
                mean,
                std_error: (var / n).sqrt(),
                admissible: eps < q.threshold && ll_ok,
                threshold: q.threshold,
            });
        }
    }

    let fits = quantities
        .iter()
        .map(|q| {
            let sel: Vec<&MomentRow> = rows.iter().filter(|r| r.quantity == q.name && r.p == q.p).collect();
            let eps: Vec<f64> = sel.iter().map(|r| r.epsilon).collect();
            let means: Vec<f64> = sel.iter().map(|r| r.mean).collect();
            let implied = sel
                .iter()
                .filter(|r| r.admissible)
                .map(|r| r.mean / r.epsilon.powf(q.stated))
                .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |a| a.max(x))));
            MomentFit {
                quantity: q.name.to_string(),
                p: q.p,
                stated_exponent: q.stated,
                fit: fit_power_law(&eps, &means),
                implied_constant: implied,
            }
        })
        .collect();

    let sup_h = u0.sup_h_power(1.0);
    let int_v = energy_norm(&u0).powi(2) - sup_h;
    let skeleton = match h {
        Some(h) => {
            let x = solve_skeleton(h, &u0, &base)?;
            let c = shell_constant(&base, &u0, 2000, 1e-12)?.value;
            let e = energy_norm(&x).powi(2);
            let bound = h.energy() * c;
            Some(SkeletonBound {
                energy: h.energy(),
                energy_norm_sq: e,
                shell_constant: c,
                bound,
                within: e <= bound * (1.0 + 1e-9),
                sup_v_powers: mc.p_list.iter().map(|&p| (p, sup_v_power(&x, p))).collect(),
            })
        }
        None => None,
    };
    Ok(MomentReport {
        rows,
        fits,
        k6: sup_h + int_v,
        k7: sup_h * int_v,
        u0_sup_v_powers: mc.p_list.iter().map(|&p| (p, sup_v_power(&u0, p))).collect(),
        skeleton,
    })
}
