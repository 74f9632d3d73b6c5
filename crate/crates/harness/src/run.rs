use std::path::PathBuf;

use log::{info, warn};

use crate::config::ExperimentConfig;
use crate::error::HarnessError;
use crate::experiments::dispatch;
use crate::manifest::{OutputSink, RunManifest, Seeds, MANIFEST_FILE};
use crate::verify::VerifyReport;

/// Command-line overrides; each beats the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(w) = self.workers {
            cfg.workers = Some(w);
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
    }
}

pub struct RunOutcome {
    pub manifest: RunManifest,
    pub manifest_path: PathBuf,
    pub verify: Option<VerifyReport>,
    pub error: Option<HarnessError>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        match &self.error {
            Some(e) => e.exit_code(),
            None => 0,
        }
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339()
}

fn workers(cfg: &ExperimentConfig) -> usize {
    cfg.workers.filter(|&w| w > 0).unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs the experiment and always writes `manifest.json` into the output
/// directory, listing whatever files were written before any failure.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome, HarnessError> {
    let started_at = now();
    let dir = cfg.output_dir.clone();
    let mut sink = OutputSink::new(&dir)?;
    let n_workers = workers(cfg);
    info!("running {} into {} with {n_workers} workers", cfg.experiment.name(), dir.display());

    let result = (|| {
        let canonical: serde_json::Value = serde_json::from_str(&cfg.canonical_json()).expect("canonical json");
        sink.write_json("config.json", "config", &canonical)?;
        let sim = cfg.sim_config()?;
        let pool = rayon::ThreadPoolBuilder::new().num_threads(n_workers).build().map_err(HarnessError::runtime)?;
        pool.install(|| dispatch(cfg, &sim, &mut sink))
    })();

    let (verify, error) = match result {
        Ok(Some(rep)) if !rep.passed => {
            let failed: Vec<&str> = rep.items.iter().filter(|i| !i.passed).map(|i| i.name.as_str()).collect();
            let e = HarnessError::Runtime(format!("verification failed: {}", failed.join(", ")));
            (Some(rep), Some(e))
        }
        Ok(rep) => (rep, None),
        Err(e) => (None, Some(e)),
    };
    if let Some(e) = &error {
        warn!("{e}");
    }
    let manifest = RunManifest {
        config_hash: cfg.hash(),
        code_version: env!("CARGO_PKG_VERSION").into(),
        experiment: cfg.experiment.name().into(),
        seeds: Seeds { base: cfg.seed, substreams: "chacha20(seed) with stream = trajectory index".into() },
        workers: n_workers,
        started_at,
        finished_at: now(),
        status: if error.is_none() { "ok" } else { "failed" }.into(),
        error: error.as_ref().map(HarnessError::record),
        files: sink.into_files(),
    };
    let manifest_path = dir.join(MANIFEST_FILE);
    let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(HarnessError::runtime)?;
    bytes.push(b'\n');
    std::fs::write(&manifest_path, bytes).map_err(|e| HarnessError::io(&manifest_path, e))?;
    Ok(RunOutcome { manifest, manifest_path, verify, error })
}
