use serde::Serialize;
use snse_core::deviation::{
    energy_norm, fw_conditional_probe, mdp_scaling_probe, moment_bound_suite, rate_function, sample_path, FWConfig,
    MomentConfig, RateDiagnostics, ScalingConfig,
};
use snse_core::lil::{
    classical_ratio_study, compactness_study, strassen_cluster_study, CompactnessReport, LilSchedule, LimitSetProbe,
    RatioReport,
};
use snse_core::noise::ControlRecord;
use snse_core::solvers::{solve_deterministic, solve_skeleton, solve_snse_with_path, SimConfig, Trajectory};

use crate::config::{ExperimentConfig, Experiment};
use crate::error::HarnessError;
use crate::manifest::OutputSink;
use crate::trajio;
use crate::verify::{verify_suite, VerifyReport};

pub const REPORT_FILE: &str = "report.json";

/// Common envelope of every report file.
#[derive(Serialize)]
struct Report<'a, T> {
    experiment: &'a str,
    config_hash: &'a str,
    seed: u64,
    result: &'a T,
}

trait ReportBody {
    fn write(&self, sink: &mut OutputSink, experiment: &str, config_hash: &str, seed: u64) -> Result<(), HarnessError>;
}

impl<T: Serialize> ReportBody for T {
    fn write(&self, sink: &mut OutputSink, experiment: &str, config_hash: &str, seed: u64) -> Result<(), HarnessError> {
        sink.write_json(REPORT_FILE, "report", &Report { experiment, config_hash, seed, result: self })
    }
}

#[derive(Serialize)]
struct SampleSummary {
    index: u64,
    file: String,
    records: usize,
    sup_h_sq: f64,
    int_v_sq: f64,
    energy_norm: f64,
    terminal_h_sq: f64,
    max_relative_divergence: f64,
}

#[derive(Serialize)]
struct SimulateResult {
    epsilon: f64,
    samples: Vec<SampleSummary>,
}

#[derive(Serialize)]
struct SeriesPoint {
    t: f64,
    h_sq: f64,
    v_sq: f64,
}

#[derive(Serialize)]
struct SkeletonResult {
    control_energy: f64,
    rate: f64,
    energy_norm: f64,
    series: Vec<SeriesPoint>,
}

#[derive(Serialize)]
struct RateReport {
    /// `None` when infeasible.
    value: Option<f64>,
    feasible: bool,
    /// `½∫|h|₀²` of the control that generated the target, an upper bound for the rate.
    target_control_rate: f64,
    energy: f64,
    residual: f64,
    tolerance: f64,
    diagnostics: RateDiagnostics,
    control: ControlRecord,
}

#[derive(Serialize)]
struct StrassenResult {
    probe_labels: Vec<String>,
    probe_tolerance: f64,
    report: snse_core::lil::ClusterReport,
}

#[derive(Serialize)]
struct ClassicalResult {
    ratio: RatioReport,
    compactness: Option<CompactnessReport>,
}

fn companion(sim: &SimConfig) -> Result<(SimConfig, Trajectory), HarnessError> {
    let base = sim.clone().with_epsilon(0.0).with_stride(1);
    let u0 = solve_deterministic(&base).map_err(HarnessError::runtime)?;
    Ok((base, u0))
}

fn series(traj: &Trajectory) -> Vec<SeriesPoint> {
    traj.times
        .iter()
        .zip(&traj.fields)
        .map(|(&t, f)| SeriesPoint { t, h_sq: f.h_norm_sq(), v_sq: f.v_norm_sq() })
        .collect()
}

/// Runs the configured experiment, writing every output through `sink`.
/// The verify experiment returns its report so the caller can set the exit status.
pub fn dispatch(cfg: &ExperimentConfig, sim: &SimConfig, sink: &mut OutputSink) -> Result<Option<VerifyReport>, HarnessError> {
    let hash = cfg.hash();
    let seed = cfg.seed;
    let thresholds = cfg.check_admissible(sim)?;
    let eps_max = thresholds.map(|t| t.eps0);
    let experiment = cfg.experiment.name();
    let report = |sink: &mut OutputSink, result: &dyn ReportBody| result.write(sink, experiment, &hash, seed);
    match &cfg.experiment {
        Experiment::Simulate { epsilon, samples } => {
            let run = sim.clone().with_epsilon(*epsilon);
            let mut out = Vec::new();
            for i in 0..*samples as u64 {
                let mut traj = if *epsilon == 0.0 {
                    solve_deterministic(&run)
                } else {
                    solve_snse_with_path(&run, &sample_path(&run, seed, i))
                }
                .map_err(HarnessError::runtime)?;
                traj.provenance.seed = Some(seed);
                traj.provenance.config_hash = Some(hash.clone());
                let file = format!("trajectories/sample_{i:05}.snsetrj");
                sink.write(&file, "trajectory", &trajio::encode(&traj, *epsilon))?;
                let f = traj.final_functionals();
                out.push(SampleSummary {
                    index: i,
                    file,
                    records: traj.len(),
                    sup_h_sq: f.sup_h_sq,
                    int_v_sq: f.int_v_sq,
                    energy_norm: f.energy_norm(),
                    terminal_h_sq: traj.terminal().h_norm_sq(),
                    max_relative_divergence: traj.max_relative_divergence,
                });
            }
            report(sink, &SimulateResult { epsilon: *epsilon, samples: out })?;
        }
        Experiment::Skeleton { control } => {
            let (base, u0) = companion(sim)?;
            let h = control.build(&base)?;
            let mut x = solve_skeleton(&h, &u0, &base).map_err(HarnessError::runtime)?;
            x.provenance.config_hash = Some(hash.clone());
            sink.write("trajectories/skeleton.snsetrj", "trajectory", &trajio::encode(&x, 0.0))?;
            sink.write_json("control.json", "control", &h.to_record())?;
            report(
                sink,
                &SkeletonResult {
                    control_energy: h.energy(),
                    rate: 0.5 * h.energy(),
                    energy_norm: energy_norm(&x),
                    series: series(&x),
                },
            )?;
        }
        Experiment::Rate { target, params } => {
            let (base, u0) = companion(sim)?;
            let h = target.build(&base)?;
            let v = solve_skeleton(&h, &u0, &base).map_err(HarnessError::runtime)?;
            let r = rate_function(&v, &u0, &base, params).map_err(HarnessError::runtime)?;
            sink.write_json("control.json", "control", &r.control.to_record())?;
            report(
                sink,
                &RateReport {
                    value: r.feasible.then_some(r.value),
                    feasible: r.feasible,
                    target_control_rate: 0.5 * h.energy(),
                    energy: r.energy,
                    residual: r.residual,
                    tolerance: r.tolerance,
                    diagnostics: r.diagnostics,
                    control: r.control.to_record(),
                },
            )?;
        }
        Experiment::MdpScaling { radii, epsilons, speed, samples } => {
            let probe =
                ScalingConfig { radii: radii.clone(), epsilons: epsilons.clone(), speed: *speed, samples: *samples, seed, eps_max };
            report(sink, &mdp_scaling_probe(sim, &probe).map_err(HarnessError::runtime)?)?;
        }
        Experiment::FwProbe { control, rho, eta, rate_exponent, increment_threshold, depth, epsilons, samples } => {
            let fw = FWConfig {
                rho: *rho,
                eta: *eta,
                rate_exponent: *rate_exponent,
                increment_threshold: *increment_threshold,
                depth: *depth,
                epsilons: epsilons.clone(),
                samples: *samples,
                seed,
                eps_max,
            };
            let h = control.build(sim)?;
            report(sink, &fw_conditional_probe(&h, &fw, sim).map_err(HarnessError::runtime)?)?;
        }
        Experiment::Moments { epsilons, p_list, samples, control } => {
            let mc = MomentConfig {
                epsilons: epsilons.clone(),
                p_list: p_list.clone(),
                samples: *samples,
                seed,
                ledger: Some(cfg.ledger(sim)),
            };
            let h = control.as_ref().map(|c| c.build(sim)).transpose()?;
            report(sink, &moment_bound_suite(sim, &mc, h.as_ref()).map_err(HarnessError::runtime)?)?;
        }
        Experiment::LilStrassen { base, j_min, j_max, harmonics, levels, tolerance, replicates } => {
            let schedule = LilSchedule::new(*base, *j_min, *j_max).map_err(HarnessError::runtime)?;
            let (b, u0) = companion(sim)?;
            let probe = LimitSetProbe::sinusoidal(&b, &u0, *harmonics, levels, *tolerance).map_err(HarnessError::runtime)?;
            let rep = strassen_cluster_study(sim, &schedule, &probe, *replicates, seed).map_err(HarnessError::runtime)?;
            report(
                sink,
                &StrassenResult {
                    probe_labels: probe.candidates().iter().map(|c| c.label.clone()).collect(),
                    probe_tolerance: probe.tolerance,
                    report: rep,
                },
            )?;
        }
        Experiment::LilClassical { base, j_min, j_max, replicates, horizons, level } => {
            let schedule = LilSchedule::new(*base, *j_min, *j_max).map_err(HarnessError::runtime)?;
            let ratio = classical_ratio_study(sim, &schedule, *replicates, seed).map_err(HarnessError::runtime)?;
            let compactness = if horizons.is_empty() {
                None
            } else {
                Some(compactness_study(sim, &schedule, horizons, *level, *replicates, seed).map_err(HarnessError::runtime)?)
            };
            report(sink, &ClassicalResult { ratio, compactness })?;
        }
        Experiment::Verify { gradient_trials, fixtures } => {
            let rep = verify_suite(sim, &cfg.ledger(sim), seed, *gradient_trials, *fixtures);
            report(sink, &rep)?;
            return Ok(Some(rep));
        }
    }
    Ok(None)
}
