use std::path::{Path, PathBuf};
use std::process::Command;

use snse_harness::config::{Experiment, ExperimentConfig};
use snse_harness::error::HarnessError;
use snse_harness::manifest::{RunManifest, MANIFEST_FILE};
use snse_harness::{run, tables, trajio};

fn preset(name: &str) -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("presets").join(name);
    ExperimentConfig::load(&path).unwrap()
}

fn into(mut cfg: ExperimentConfig, dir: &Path) -> ExperimentConfig {
    cfg.output_dir = dir.to_path_buf();
    cfg.workers = Some(2);
    cfg
}

fn small_simulate(t_end: f64) -> ExperimentConfig {
    let text = format!(
        "seed = 4\n[grid]\nk_max = 2\nt_end = {t_end}\ndt = 0.01\n[initial]\nkind = \"taylor_green\"\namplitude = 1.0\n\
         [noise]\nnum_directions = 4\n[experiment]\nkind = \"simulate\"\nepsilon = 0.05\n"
    );
    ExperimentConfig::from_toml(&text).unwrap()
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn zero_horizon_simulation_stores_only_the_initial_state() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = into(small_simulate(0.0), tmp.path());
    let out = run(&cfg).unwrap();
    assert!(out.error.is_none());
    let trajs: Vec<_> = out.manifest.files.iter().filter(|f| f.role == "trajectory").collect();
    assert_eq!(trajs.len(), 1);
    let bytes = std::fs::read(tmp.path().join(&trajs[0].path)).unwrap();
    let t = trajio::decode(&bytes).unwrap();
    assert_eq!(t.times, vec![0.0]);
    let u0 = cfg.sim_config().unwrap().initial;
    assert!(t.fields[0].sub(&u0).max_amplitude() <= 1e-15 * u0.max_amplitude());
    assert!(out.manifest.stale_files(tmp.path()).is_empty());
}

#[test]
fn identical_config_and_seed_give_identical_checksums() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut cfg = small_simulate(0.1);
    cfg.experiment = Experiment::Simulate { epsilon: 0.05, samples: 3 };
    let ma = run(&into(cfg.clone(), a.path())).unwrap().manifest;
    let mut other = into(cfg.clone(), b.path());
    other.workers = Some(1);
    let mb = run(&other).unwrap().manifest;
    assert_eq!(ma.config_hash, mb.config_hash);
    assert_eq!(ma.files, mb.files);
    let c = tempfile::tempdir().unwrap();
    let mut reseeded = into(cfg, c.path());
    reseeded.seed += 1;
    let mc = run(&reseeded).unwrap().manifest;
    assert_ne!(ma.files.iter().find(|f| f.role == "report"), mc.files.iter().find(|f| f.role == "report"));
}

/// `I = ½ Σ_j Σ_m (h_{m,j})² Δt / λ_j` with `h_{m,j} = (c_{m+1} − e c_m) / (φ g_j)`,
/// read off the target coefficient by coefficient.
fn diagonal_rate_oracle(cfg: &ExperimentConfig, target: &[snse_core::spectral::SpectralField]) -> f64 {
    let sim = cfg.sim_config().unwrap();
    let dt = sim.dt;
    let coeffs: Vec<Vec<f64>> = target.iter().map(|f| sim.noise.coefficients_of(f)).collect();
    let mut e = 0.0;
    for (j, d) in sim.noise.directions().iter().enumerate() {
        let a = d.mode.norm_sq();
        let decay = (-a * dt).exp();
        let phi = (1.0 - decay) / a;
        for m in 0..sim.steps() {
            let h = (coeffs[m + 1][j] - decay * coeffs[m][j]) / (phi * d.gain);
            e += h * h / d.lambda * dt;
        }
    }
    0.5 * e
}

#[test]
fn linear_diagonal_rate_matches_the_per_mode_oracle() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = into(preset("rate_linear_diagonal.toml"), tmp.path());
    let out = run(&cfg).unwrap();
    assert!(out.error.is_none(), "{:?}", out.error);
    let sim = cfg.sim_config().unwrap();
    let Experiment::Rate { target, .. } = &cfg.experiment else { unreachable!() };
    let h = target.build(&sim).unwrap();
    let u0 = snse_core::solvers::solve_deterministic(&sim.clone().with_stride(1)).unwrap();
    let v = snse_core::solvers::solve_skeleton(&h, &u0, &sim.clone().with_stride(1)).unwrap();
    let oracle = diagonal_rate_oracle(&cfg, &v.fields);
    let r = report(tmp.path());
    let value = r["result"]["value"].as_f64().unwrap();
    assert!((value - oracle).abs() <= 1e-3 * oracle, "{value} vs {oracle}");
    assert_eq!(r["result"]["feasible"], true);
}

#[test]
fn failures_still_write_a_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = into(preset("moments.toml"), tmp.path());
    cfg.experiment = Experiment::Moments { epsilons: vec![0.9], p_list: vec![1.0], samples: 2, control: None };
    let out = run(&cfg).unwrap();
    match &out.error {
        Some(HarnessError::Admissibility { threshold_name, .. }) => assert!(threshold_name.contains("eps0")),
        other => panic!("{other:?}"),
    }
    assert_eq!(out.exit_code(), 3);
    let m = RunManifest::load(&tmp.path().join(MANIFEST_FILE)).unwrap();
    assert_eq!(m.status, "failed");
    assert_eq!(m.error.unwrap().kind, "admissibility");
    assert!(m.files.iter().any(|f| f.role == "config"));
    assert!(!m.files.iter().any(|f| f.role == "report"));
}

#[test]
fn emitting_tables_from_a_report_free_manifest_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = into(preset("moments.toml"), tmp.path());
    cfg.experiment = Experiment::Moments { epsilons: vec![0.9], p_list: vec![1.0], samples: 2, control: None };
    let out = run(&cfg).unwrap();
    let written = tables::emit_tables(&out.manifest_path).unwrap();
    assert!(written.is_empty());
    assert!(!tmp.path().join(tables::TABLE_DIR).exists());
}

#[test]
fn mdp_tables_have_the_documented_columns_and_reemit_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = into(preset("mdp_single_mode.toml"), tmp.path());
    if let Experiment::MdpScaling { samples, epsilons, .. } = &mut cfg.experiment {
        *samples = 200;
        epsilons.truncate(2);
    }
    let out = run(&cfg).unwrap();
    assert!(out.error.is_none(), "{:?}", out.error);
    let first = tables::emit_tables(&out.manifest_path).unwrap();
    let csv_path = tmp.path().join("tables/mdp_scaling.csv");
    assert!(first.contains(&csv_path));
    let text = std::fs::read_to_string(&csv_path).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("epsilon,radius,p_hat,lo,hi,scaled_log_p,neg_min_rate"), "{header}");
    assert_eq!(text.lines().count(), 3);
    let before: Vec<Vec<u8>> = first.iter().map(|p| std::fs::read(p).unwrap()).collect();
    let again = tables::emit_tables(&out.manifest_path).unwrap();
    assert_eq!(first, again);
    let after: Vec<Vec<u8>> = again.iter().map(|p| std::fs::read(p).unwrap()).collect();
    assert_eq!(before, after);
}

#[test]
fn every_preset_parses_and_builds() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("presets");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let p: PathBuf = entry.unwrap().path();
        let cfg = ExperimentConfig::load(&p).unwrap();
        let sim = cfg.sim_config().unwrap();
        cfg.check_admissible(&sim).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        n += 1;
    }
    assert!(n >= 8);
}

#[test]
fn verify_reports_every_item() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = into(preset("verify.toml"), tmp.path());
    cfg.experiment = Experiment::Verify { gradient_trials: 20, fixtures: 10 };
    let out = run(&cfg).unwrap();
    let rep = out.verify.expect("verify report");
    for i in &rep.items {
        assert!(i.passed, "{i:?}");
    }
    let names: Vec<&str> = rep.items.iter().map(|i| i.name.as_str()).collect();
    for n in ["divergence_negative_control", "gradient_check", "trilinear_antisymmetry", "epsilon_zero_reduction"] {
        assert!(names.contains(&n), "{names:?}");
    }
    let g = rep.items.iter().find(|i| i.name == "gradient_check").unwrap();
    assert!(g.measured <= 1e-4);
}

fn snse(args: &[&str], envs: &[(&str, &str)]) -> std::process::Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_snse"));
    c.args(args).env_remove("SNSE_SEED").env_remove("SNSE_WORKERS");
    for (k, v) in envs {
        c.env(k, v);
    }
    c.output().unwrap()
}

#[test]
fn cli_verbs_and_overrides() {
    let out = snse(&["print-config-schema"], &[]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("[experiment]"));

    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("c.toml");
    std::fs::write(
        &cfg_path,
        "[grid]\nk_max = 2\nt_end = 0.05\ndt = 0.01\n[noise]\nnum_directions = 4\n[experiment]\nkind = \"simulate\"\nepsilon = 0.1\n",
    )
    .unwrap();
    let out_dir = tmp.path().join("o");
    let o = out_dir.to_str().unwrap();
    let res = snse(&["run", "--config", cfg_path.to_str().unwrap(), "--out", o], &[("SNSE_SEED", "21"), ("SNSE_WORKERS", "1")]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let m = RunManifest::load(&out_dir.join(MANIFEST_FILE)).unwrap();
    assert_eq!(m.seeds.base, 21);
    assert_eq!(m.workers, 1);
    // the flag beats the environment
    let res = snse(&["run", "--config", cfg_path.to_str().unwrap(), "--out", o, "--seed", "5"], &[("SNSE_SEED", "21")]);
    assert!(res.status.success());
    assert_eq!(RunManifest::load(&out_dir.join(MANIFEST_FILE)).unwrap().seeds.base, 5);

    let res = snse(&["emit-tables", out_dir.join(MANIFEST_FILE).to_str().unwrap()], &[]);
    assert!(res.status.success());
    assert!(out_dir.join("tables/simulate_samples.csv").exists());

    std::fs::write(&cfg_path, "[grid]\nk_max = 2\nt_end = 0.05\ndt = 0.01\nbogus = 1\n[experiment]\nkind = \"simulate\"\nepsilon = 0.1\n").unwrap();
    let res = snse(&["run", "--config", cfg_path.to_str().unwrap(), "--out", o], &[]);
    assert_eq!(res.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(res.stderr.rsplit(|&b| b == b'\n').find(|l| !l.is_empty()).unwrap()).unwrap();
    assert_eq!(err["kind"], "schema");
    assert_eq!(err["keys"][0], "grid.bogus");
}
