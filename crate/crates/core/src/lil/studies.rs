use serde::{Deserialize, Serialize};
use statrs::statistics::{Data, OrderStatistics};

use super::{limit_set_distance, z_process, LilError, LilSchedule, LimitSetProbe};
use crate::deviation::{
    deterministic_companion, energy_distance, energy_norm, energy_norm_of, per_sample, sample_path, ProbabilityEstimate,
};
use crate::solvers::{solve_snse_with_path, SimConfig, Trajectory};

/// Quantile levels reported by the ratio study.
pub const RATIO_QUANTILES: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 0.9];

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn running(xs: &[f64], pick: fn(f64, f64) -> f64) -> Vec<f64> {
    xs.iter()
        .scan(None, |acc: &mut Option<f64>, &x| {
            let v = acc.map_or(x, |a| pick(a, x));
            *acc = Some(v);
            Some(v)
        })
        .collect()
}

/// Least-squares slope of `ys` against `xs`.
fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return 0.0;
    }
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - xm).powi(2)).sum();
    sxy / sxx
}

/// The fluctuation `Z^{ε_j}` for every schedule index, all driven by the
/// noise path of replicate `rep`.
fn replicate_z(base: &SimConfig, u0: &Trajectory, schedule: &LilSchedule, seed: u64, rep: u64) -> Result<Vec<Trajectory>, LilError> {
    let path = sample_path(base, seed, rep);
    schedule
        .epsilons()
        .into_iter()
        .map(|eps| {
            let u = solve_snse_with_path(&base.clone().with_epsilon(eps), &path)?;
            z_process(&u, u0, eps)
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    fn of(values: &[f64], bins: usize) -> Self {
        let hi = values.iter().copied().fold(0.0, f64::max);
        let width = if hi > 0.0 { hi / bins as f64 } else { 1.0 };
        let edges = (0..=bins).map(|i| i as f64 * width).collect();
        let mut counts = vec![0; bins];
        for &v in values {
            counts[((v / width) as usize).min(bins - 1)] += 1;
        }
        Self { edges, counts }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClusterReport {
    pub epsilons: Vec<f64>,
    /// `[replicate][j]` distance to the probe.
    pub distances: Vec<Vec<f64>>,
    /// `[replicate][j]` nearest candidate.
    pub nearest: Vec<Vec<usize>>,
    /// `[replicate][j]` running maximum of the distance over `j`.
    pub running_max: Vec<Vec<f64>>,
    /// Per candidate: share of `(replicate, j)` pairs within the probe tolerance.
    pub hit_fraction: Vec<f64>,
    /// Share of `(replicate, j)` pairs within tolerance of some candidate.
    pub any_hit_fraction: f64,
    pub histogram: Histogram,
}

/// Distances from `Z^{ε_j}` to the probe along the schedule, one common noise
/// path per replicate.
pub fn strassen_cluster_study(
    cfg: &SimConfig,
    schedule: &LilSchedule,
    probe: &LimitSetProbe,
    n_reps: usize,
    seed: u64,
) -> Result<ClusterReport, LilError> {
    schedule.validate()?;
    if probe.is_empty() || n_reps == 0 {
        return Err(LilError::Parameter("need a nonempty probe and at least one replicate".into()));
    }
    let (base, u0) = deterministic_companion(cfg)?;
    let per_rep = per_sample(n_reps, |rep| {
        let zs = replicate_z(&base, &u0, schedule, seed, rep)?;
        zs.iter()
            .map(|z| {
                let all = probe
                    .candidates()
                    .iter()
                    .map(|c| energy_distance(z, &c.image))
                    .collect::<Result<Vec<f64>, _>>()?;
                let (d, id) = limit_set_distance(z, probe)?;
                Ok::<_, LilError>((d, id, all))
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    let pairs = (n_reps * schedule.epsilons().len()) as f64;
    let tol = probe.tolerance;
    let mut hits = vec![0usize; probe.len()];
    let mut any = 0usize;
    for (_, _, all) in per_rep.iter().flatten() {
        for (h, d) in hits.iter_mut().zip(all) {
            if *d <= tol {
                *h += 1;
            }
        }
        if all.iter().any(|d| *d <= tol) {
            any += 1;
        }
    }
    let distances: Vec<Vec<f64>> = per_rep.iter().map(|r| r.iter().map(|x| x.0).collect()).collect();
    let flat: Vec<f64> = distances.iter().flatten().copied().collect();
    Ok(ClusterReport {
        epsilons: schedule.epsilons(),
        nearest: per_rep.iter().map(|r| r.iter().map(|x| x.1).collect()).collect(),
        running_max: distances.iter().map(|d| running(d, f64::max)).collect(),
        hit_fraction: hits.iter().map(|&h| h as f64 / pairs).collect(),
        any_hit_fraction: any as f64 / pairs,
        histogram: Histogram::of(&flat, 20),
        distances,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RatioRow {
    pub j: u32,
    pub epsilon: f64,
    pub mean: f64,
    pub std_error: f64,
    pub min: f64,
    pub max: f64,
    /// `(level, empirical quantile)`.
    pub quantiles: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RatioReport {
    /// `[replicate][j]` ratio `‖u^{ε_j} − u⁰‖_{𝓔(T)} / (2ε_j log log(1/ε_j))^{1/2}`.
    pub ratios: Vec<Vec<f64>>,
    pub running_max: Vec<Vec<f64>>,
    pub running_min: Vec<Vec<f64>>,
    pub rows: Vec<RatioRow>,
    /// Slope of the mean ratio against `j`.
    pub trend_slope: f64,
}

/// The normalized deviation `‖Z^{ε_j}‖_{𝓔(T)}` along the schedule. Only the
/// observed values and their trend are reported.
pub fn classical_ratio_study(
    cfg: &SimConfig,
    schedule: &LilSchedule,
    n_reps: usize,
    seed: u64,
) -> Result<RatioReport, LilError> {
    schedule.validate()?;
    if n_reps == 0 {
        return Err(LilError::Parameter("need at least one replicate".into()));
    }
    let (base, u0) = deterministic_companion(cfg)?;
    let ratios = per_sample(n_reps, |rep| {
        Ok::<_, LilError>(replicate_z(&base, &u0, schedule, seed, rep)?.iter().map(energy_norm).collect::<Vec<f64>>())
    })?;
    let rows: Vec<RatioRow> = schedule
        .indices()
        .enumerate()
        .map(|(k, j)| {
            let col: Vec<f64> = ratios.iter().map(|r| r[k]).collect();
            let (mean, std_error) = mean_and_se(&col);
            let mut data = Data::new(col.clone());
            RatioRow {
                j,
                epsilon: schedule.epsilon(j),
                mean,
                std_error,
                min: col.iter().copied().fold(f64::INFINITY, f64::min),
                max: col.iter().copied().fold(0.0, f64::max),
                quantiles: RATIO_QUANTILES.iter().map(|&q| (q, data.quantile(q))).collect(),
            }
        })
        .collect();
    let js: Vec<f64> = rows.iter().map(|r| r.j as f64).collect();
    let means: Vec<f64> = rows.iter().map(|r| r.mean).collect();
    Ok(RatioReport {
        running_max: ratios.iter().map(|r| running(r, f64::max)).collect(),
        running_min: ratios.iter().map(|r| running(r, f64::min)).collect(),
        trend_slope: slope(&js, &means),
        rows,
        ratios,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairRow {
    pub eps_small: f64,
    pub eps_large: f64,
    /// `E‖Z^{ε_small} − Z^{ε_large}‖_{𝓔(T)}` on common noise.
    pub mean_distance: f64,
    pub std_error: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TailRow {
    pub horizon: f64,
    pub epsilon: f64,
    /// `P(‖Z^ε‖_{𝓔(S)} > level)`.
    pub probability: ProbabilityEstimate,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CompactnessReport {
    pub pairs: Vec<PairRow>,
    /// Mean pair distance is nonincreasing as the pair moves toward `ε = 0`.
    pub pairs_decreasing: bool,
    pub level: f64,
    pub tails: Vec<TailRow>,
    /// For every `ε`, the tail probability is nonincreasing as `S` shrinks.
    pub tails_decreasing: bool,
}

/// Empirical surrogates of the tightness conditions: distances between
/// consecutive schedule levels on common noise, and the short-horizon tail
/// `P(‖Z^ε‖_{𝓔(S)} > level)`.
pub fn compactness_study(
    cfg: &SimConfig,
    schedule: &LilSchedule,
    horizons: &[f64],
    level: f64,
    n_reps: usize,
    seed: u64,
) -> Result<CompactnessReport, LilError> {
    schedule.validate()?;
    if n_reps == 0 || horizons.is_empty() {
        return Err(LilError::Parameter("need replicates and at least one horizon".into()));
    }
    let (base, u0) = deterministic_companion(cfg)?;
    let cut: Vec<usize> = horizons
        .iter()
        .map(|&s| {
            let m = (s / base.dt).round();
            if !(s > 0.0 && s <= base.t_end) || (m * base.dt - s).abs() > 1e-9 * base.dt {
                return Err(LilError::Parameter(format!("horizon {s} is not a grid time in (0, T]")));
            }
            Ok(m as usize)
        })
        .collect::<Result<_, _>>()?;
    let n_eps = schedule.epsilons().len();
    let per_rep = per_sample(n_reps, |rep| {
        let zs = replicate_z(&base, &u0, schedule, seed, rep)?;
        let pairs = zs.windows(2).map(|w| energy_distance(&w[1], &w[0])).collect::<Result<Vec<f64>, _>>()?;
        let tails: Vec<Vec<bool>> = cut
            .iter()
            .map(|&m| zs.iter().map(|z| energy_norm_of(&z.times[..=m], &z.fields[..=m]) > level).collect())
            .collect();
        Ok::<_, LilError>((pairs, tails))
    })?;
    let eps = schedule.epsilons();
    let pairs: Vec<PairRow> = (0..n_eps.saturating_sub(1))
        .map(|k| {
            let col: Vec<f64> = per_rep.iter().map(|r| r.0[k]).collect();
            let (mean_distance, std_error) = mean_and_se(&col);
            PairRow { eps_small: eps[k + 1], eps_large: eps[k], mean_distance, std_error }
        })
        .collect();
    let mut tails = Vec::new();
    for (h, &s) in horizons.iter().enumerate() {
        for (k, &e) in eps.iter().enumerate() {
            let hits = per_rep.iter().filter(|r| r.1[h][k]).count();
            tails.push(TailRow { horizon: s, epsilon: e, probability: ProbabilityEstimate::from_counts(hits, n_reps) });
        }
    }
    let pairs_decreasing = pairs.windows(2).all(|w| w[1].mean_distance <= w[0].mean_distance);
    let tails_decreasing = eps.iter().all(|&e| {
        let mut row: Vec<&TailRow> = tails.iter().filter(|t| t.epsilon == e).collect();
        row.sort_by(|a, b| a.horizon.total_cmp(&b.horizon));
        row.windows(2).all(|w| w[0].probability.hits <= w[1].probability.hits)
    });
    Ok(CompactnessReport { pairs, pairs_decreasing, level, tails, tails_decreasing })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{NoiseModel, NoiseSpec};
    use crate::spectral::{SpectralField, SpectralGrid};

    fn cfg(init: f64) -> SimConfig {
        let g = SpectralGrid::new(2, 8).unwrap();
        let noise = NoiseModel::new(&g, &NoiseSpec { num_directions: Some(4), ..NoiseSpec::default() }).unwrap();
        SimConfig::new(SpectralField::taylor_green(&g, init), noise, 0.2, 0.01).unwrap()
    }

    #[test]
    fn degenerate_schedule_gives_one_histogram() {
        let c = cfg(0.5);
        let (base, u0) = deterministic_companion(&c).unwrap();
        let probe = LimitSetProbe::zero(&base, &u0, 0.05).unwrap();
        let s = LilSchedule::new(10.0, 3, 3).unwrap();
        let rep = strassen_cluster_study(&c, &s, &probe, 12, 4).unwrap();
        assert_eq!(rep.distances.len(), 12);
        assert!(rep.distances.iter().all(|d| d.len() == 1));
        assert_eq!(rep.histogram.counts.iter().sum::<usize>(), 12);
        // distance to {0} is the norm of Z
        let ratio = classical_ratio_study(&c, &s, 12, 4).unwrap();
        for (d, r) in rep.distances.iter().zip(&ratio.ratios) {
            assert!((d[0] - r[0]).abs() <= 1e-12 * r[0]);
        }
    }

    #[test]
    fn infinite_tolerance_hits_everything() {
        let c = cfg(0.5);
        let (base, u0) = deterministic_companion(&c).unwrap();
        let probe = LimitSetProbe::sinusoidal(&base, &u0, 1, &[1.0], f64::INFINITY).unwrap();
        let s = LilSchedule::new(4.0, 3, 5).unwrap();
        let rep = strassen_cluster_study(&c, &s, &probe, 4, 1).unwrap();
        assert!(rep.hit_fraction.iter().all(|&f| f == 1.0));
        assert_eq!(rep.any_hit_fraction, 1.0);
        for r in &rep.running_max {
            assert!(r.windows(2).all(|w| w[1] >= w[0]));
        }
    }

    #[test]
    fn ratios_vanish_without_noise_and_are_nonnegative() {
        let g = SpectralGrid::new(2, 8).unwrap();
        let spec = NoiseSpec { num_directions: Some(4), amplitude: 0.0, ..NoiseSpec::default() };
        let noise = NoiseModel::new(&g, &spec).unwrap();
        let c = SimConfig::new(SpectralField::taylor_green(&g, 0.5), noise, 0.2, 0.01).unwrap();
        let s = LilSchedule::new(4.0, 3, 5).unwrap();
        let rep = classical_ratio_study(&c, &s, 3, 1).unwrap();
        assert!(rep.ratios.iter().flatten().all(|&r| r == 0.0));
        let rep = classical_ratio_study(&cfg(0.5), &s, 3, 1).unwrap();
        assert!(rep.ratios.iter().flatten().all(|&r| r > 0.0));
        assert_eq!(rep.rows.len(), 3);
    }

    #[test]
    fn compactness_trends_in_the_linear_regime() {
        let c = cfg(0.0).linear();
        let s = LilSchedule::new(10.0, 2, 6).unwrap();
        let rep = compactness_study(&c, &s, &[0.05, 0.1, 0.2], 0.3, 200, 2).unwrap();
        assert!(rep.pairs_decreasing, "{:?}", rep.pairs);
        assert!(rep.tails_decreasing);
        assert!(compactness_study(&c, &s, &[0.013], 0.3, 2, 2).is_err());
    }
}
