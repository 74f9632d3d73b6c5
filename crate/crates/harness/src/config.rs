use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use snse_core::deviation::{epsilon_thresholds, ConstantsLedger, EpsilonThresholds, OptParams, ScalingSpeed};
use snse_core::noise::{Control, NoiseModel, NoiseSpec};
use snse_core::rng::stream;
use snse_core::solvers::{Forcing, SimConfig};
use snse_core::spectral::{SpectralField, SpectralGrid, Wavevector};

use crate::error::HarnessError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "schema_version")]
    pub version: u32,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; all available cores when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub grid: GridConfig,
    #[serde(default)]
    pub initial: FieldSpec,
    #[serde(default)]
    pub forcing: ForcingSpec,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub constants: ConstantsSpec,
    pub experiment: Experiment,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("snse-out")
}

fn yes() -> bool {
    true
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub k_max: usize,
    /// Physical resolution; the smallest dealiased one when absent.
    #[serde(default)]
    pub n_phys: Option<usize>,
    pub t_end: f64,
    pub dt: f64,
    #[serde(default = "yes")]
    pub nonlinear: bool,
    #[serde(default = "one")]
    pub record_stride: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldSpec {
    #[default]
    Zero,
    TaylorGreen { amplitude: f64 },
    /// Real mode pair with velocity amplitude `amplitude` at `k`, projected.
    Mode { k: [i32; 2], amplitude: [f64; 2] },
    /// Gaussian amplitudes decaying like `|k|^{-slope}`, rescaled to `|u| = norm`.
    Random { slope: f64, norm: f64, seed: u64 },
}

impl FieldSpec {
    pub fn build(&self, grid: &SpectralGrid) -> Result<SpectralField, HarnessError> {
        Ok(match self {
            FieldSpec::Zero => SpectralField::zeros(grid),
            FieldSpec::TaylorGreen { amplitude } => SpectralField::taylor_green(grid, *amplitude),
            FieldSpec::Mode { k, amplitude } => SpectralField::mode_pair(
                grid,
                Wavevector::new(k[0], k[1]),
                [Complex64::new(amplitude[0], 0.0), Complex64::new(amplitude[1], 0.0)],
            )
            .map_err(|e| schema(format!("initial/forcing mode: {e}"), "mode"))?,
            FieldSpec::Random { slope, norm, seed } => {
                let f = SpectralField::random(grid, &mut stream(*seed, 0), *slope);
                let n = f.h_norm_sq().sqrt();
                if n > 0.0 {
                    f.scaled(norm / n)
                } else {
                    f
                }
            }
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ForcingSpec {
    #[default]
    None,
    Steady { field: FieldSpec },
    Oscillating { field: FieldSpec, omega: f64 },
}

/// Pinned constants `K₁ … K₉`. Unset entries come from the noise model and forcing.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstantsSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k3: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k4: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k5: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k6: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k7: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k8: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k9: Option<f64>,
}

impl ConstantsSpec {
    fn entries(&self) -> [Option<f64>; 9] {
        [self.k1, self.k2, self.k3, self.k4, self.k5, self.k6, self.k7, self.k8, self.k9]
    }
}

/// Piecewise-constant control on the solver grid.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControlSpec {
    #[default]
    Zero,
    /// One constant coordinate per noise direction.
    Constant { value: Vec<f64> },
    /// `cos(nπt/T)` along one direction, scaled so that `½∫|h|₀² = rate`.
    Cosine { direction: usize, harmonic: u32, rate: f64 },
    /// `amplitude · sin((j+1) t + phase)` along every direction `j`.
    Sines { amplitude: f64, phase: f64 },
}

impl ControlSpec {
    pub fn build(&self, sim: &SimConfig) -> Result<Control, HarnessError> {
        let (model, t_end, steps) = (&sim.noise, sim.t_end, sim.steps());
        let dim = model.num_directions();
        let c = match self {
            ControlSpec::Zero => Ok(Control::zero(model, t_end, steps)),
            ControlSpec::Constant { value } => Control::constant(model, t_end, steps, value),
            ControlSpec::Cosine { direction, harmonic, rate } => {
                if *direction >= dim {
                    return Err(schema(format!("control direction {direction} but only {dim} directions"), "direction"));
                }
                if !(*rate >= 0.0) {
                    return Err(schema(format!("control rate {rate} must be nonnegative"), "rate"));
                }
                let shape = Control::from_fn(model, t_end, steps, |t| {
                    let mut v = vec![0.0; dim];
                    v[*direction] = (f64::from(*harmonic) * std::f64::consts::PI * t / t_end).cos();
                    v
                })
                .map_err(HarnessError::runtime)?;
                let e = shape.energy();
                Ok(if e > 0.0 { shape.scaled((2.0 * rate / e).sqrt()) } else { shape })
            }
            ControlSpec::Sines { amplitude, phase } => Control::from_fn(model, t_end, steps, |t| {
                (0..dim).map(|j| amplitude * ((j + 1) as f64 * t + phase).sin()).collect()
            }),
        };
        c.map_err(|e| schema(format!("control: {e}"), "control"))
    }
}

fn default_samples() -> usize {
    1
}

fn default_trials() -> usize {
    20
}

fn default_fixtures() -> usize {
    100
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    Simulate {
        epsilon: f64,
        #[serde(default = "default_samples")]
        samples: usize,
    },
    Skeleton {
        #[serde(default)]
        control: ControlSpec,
    },
    /// Rate of the skeleton image of `control`.
    Rate {
        target: ControlSpec,
        #[serde(default)]
        params: OptParams,
    },
    MdpScaling {
        radii: Vec<f64>,
        epsilons: Vec<f64>,
        speed: ScalingSpeed,
        samples: usize,
    },
    FwProbe {
        control: ControlSpec,
        rho: f64,
        eta: f64,
        rate_exponent: f64,
        increment_threshold: f64,
        depth: u32,
        epsilons: Vec<f64>,
        samples: usize,
    },
    Moments {
        epsilons: Vec<f64>,
        p_list: Vec<f64>,
        samples: usize,
        #[serde(default)]
        control: Option<ControlSpec>,
    },
    LilStrassen {
        base: f64,
        j_min: u32,
        j_max: u32,
        harmonics: u32,
        levels: Vec<f64>,
        tolerance: f64,
        replicates: usize,
    },
    LilClassical {
        base: f64,
        j_min: u32,
        j_max: u32,
        replicates: usize,
        /// Horizons `S` for the short-time tail; the tail study is skipped when empty.
        #[serde(default)]
        horizons: Vec<f64>,
        #[serde(default)]
        level: f64,
    },
    Verify {
        #[serde(default = "default_trials")]
        gradient_trials: usize,
        #[serde(default = "default_fixtures")]
        fixtures: usize,
    },
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Simulate { .. } => "simulate",
            Experiment::Skeleton { .. } => "skeleton",
            Experiment::Rate { .. } => "rate",
            Experiment::MdpScaling { .. } => "mdp-scaling",
            Experiment::FwProbe { .. } => "fw-probe",
            Experiment::Moments { .. } => "moments",
            Experiment::LilStrassen { .. } => "lil-strassen",
            Experiment::LilClassical { .. } => "lil-classical",
            Experiment::Verify { .. } => "verify",
        }
    }

    /// Noise levels of a deviation experiment.
    pub fn epsilon_grid(&self) -> Option<Vec<f64>> {
        match self {
            Experiment::MdpScaling { epsilons, .. }
            | Experiment::FwProbe { epsilons, .. }
            | Experiment::Moments { epsilons, .. } => Some(epsilons.clone()),
            Experiment::LilStrassen { base, j_min, j_max, .. } | Experiment::LilClassical { base, j_min, j_max, .. } => {
                Some((*j_min..=*j_max).map(|j| base.powi(-(j as i32))).collect())
            }
            _ => None,
        }
    }
}

/// Keys present in the input but absent from the parsed config written back out.
fn unknown_keys(input: &toml::Value, known: &serde_json::Value, prefix: &str, out: &mut Vec<String>) {
    match (input, known) {
        (toml::Value::Table(t), serde_json::Value::Object(k)) => {
            for (key, v) in t {
                let path = if prefix.is_empty() { key.clone() } else { format!("{prefix}.{key}") };
                match k.get(key) {
                    Some(kv) => unknown_keys(v, kv, &path, out),
                    None => out.push(path),
                }
            }
        }
        (toml::Value::Array(a), serde_json::Value::Array(k)) => {
            for (i, (v, kv)) in a.iter().zip(k).enumerate() {
                unknown_keys(v, kv, &format!("{prefix}[{i}]"), out);
            }
        }
        _ => {}
    }
}

fn schema(message: String, key: &str) -> HarnessError {
    HarnessError::Schema { message, keys: vec![key.to_string()] }
}

impl ExperimentConfig {
    /// Parses TOML, rejecting unknown keys (all of them are listed).
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let raw: toml::Value = toml::from_str(text).map_err(|e| HarnessError::Schema { message: e.to_string(), keys: Vec::new() })?;
        let cfg: Self = raw.clone().try_into().map_err(|e: toml::de::Error| HarnessError::Schema {
            message: e.message().to_string(),
            keys: Vec::new(),
        })?;
        let known = serde_json::to_value(&cfg).expect("config serializes");
        let mut unknown = Vec::new();
        unknown_keys(&raw, &known, "", &mut unknown);
        if !unknown.is_empty() {
            return Err(HarnessError::Schema { message: format!("unknown keys: {}", unknown.join(", ")), keys: unknown });
        }
        if cfg.version != SCHEMA_VERSION {
            return Err(schema(format!("schema version {} is not {SCHEMA_VERSION}", cfg.version), "version"));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml(&text)
    }

    /// JSON with sorted keys, without the output directory and worker count.
    pub fn canonical_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = v.as_object_mut() {
            map.remove("output_dir");
            map.remove("workers");
        }
        v.to_string()
    }

    /// SHA-256 of [`Self::canonical_json`].
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    pub fn grid(&self) -> Result<SpectralGrid, HarnessError> {
        let g = &self.grid;
        match g.n_phys {
            Some(n) => SpectralGrid::new(g.k_max, n),
            None => SpectralGrid::dealiased(g.k_max),
        }
        .map_err(|e| schema(format!("grid: {e}"), "grid"))
    }

    pub fn sim_config(&self) -> Result<SimConfig, HarnessError> {
        let grid = self.grid()?;
        let noise = NoiseModel::new(&grid, &self.noise).map_err(|e| schema(format!("noise: {e}"), "noise"))?;
        let initial = self.initial.build(&grid)?;
        let forcing = match &self.forcing {
            ForcingSpec::None => Forcing::None,
            ForcingSpec::Steady { field } => Forcing::Steady(field.build(&grid)?),
            ForcingSpec::Oscillating { field, omega } => Forcing::Oscillating { field: field.build(&grid)?, omega: *omega },
        };
        let mut sim = SimConfig::new(initial, noise, self.grid.t_end, self.grid.dt)
            .map_err(|e| schema(format!("grid: {e}"), "grid"))?
            .with_forcing(forcing)
            .with_stride(self.grid.record_stride);
        sim.nonlinear = self.grid.nonlinear;
        sim.validate().map_err(|e| schema(format!("grid: {e}"), "grid"))?;
        Ok(sim)
    }

    /// Constants derived from the model, overridden by pinned entries.
    pub fn ledger(&self, sim: &SimConfig) -> ConstantsLedger {
        let mut ledger = ConstantsLedger::from_model(&sim.noise, &sim.forcing, sim.t_end);
        for (i, v) in self.constants.entries().iter().enumerate() {
            if let Some(v) = v {
                ledger.set(i + 1, *v);
            }
        }
        ledger
    }

    /// Checks the noise levels of deviation experiments against `ε₀`.
    pub fn check_admissible(&self, sim: &SimConfig) -> Result<Option<EpsilonThresholds>, HarnessError> {
        let Some(grid) = self.experiment.epsilon_grid() else { return Ok(None) };
        let t = epsilon_thresholds(&self.ledger(sim), 1.0).map_err(|e| schema(format!("constants: {e}"), "constants"))?;
        for e in grid {
            if !(e < t.eps0) {
                return Err(HarnessError::Admissibility {
                    epsilon: e,
                    threshold_name: "eps0 = min{1/(2K1^2), 1/(4K1), 1/(2K2), 1/(78K9)}".into(),
                    threshold: t.eps0,
                });
            }
        }
        Ok(Some(t))
    }
}

/// Annotated reference for the config file.
pub const SCHEMA_TEXT: &str = r#"# snse experiment config, schema version 1 (TOML)
version = 1                  # optional, must be 1
seed = 0                     # base seed; trajectory i draws from ChaCha20(seed, stream i)
workers = 4                  # optional; not part of the config hash
output_dir = "snse-out"      # not part of the config hash

[grid]
k_max = 10                   # retained modes |kx|, |ky| <= k_max
n_phys = 32                  # optional, default 3*k_max + 1 rounded up to even
t_end = 1.0
dt = 1e-3                    # t_end must be a multiple of dt
nonlinear = true             # false drops the advection term
record_stride = 1            # keep every n-th state

[initial]                    # kind = zero | taylor_green | mode | random
kind = "taylor_green"
amplitude = 1.0
# kind = "mode", k = [0, 1], amplitude = [1.0, 0.0]
# kind = "random", slope = 1.5, norm = 1.0, seed = 3

[forcing]                    # kind = none | steady | oscillating
kind = "none"
# kind = "steady", field = { kind = "taylor_green", amplitude = 0.5 }
# kind = "oscillating", omega = 2.0, field = { ... }

[noise]
spectrum_exponent = 2.0      # lambda_j = |k_j|^(-2s)
num_directions = 8           # optional, default all
amplitude = 1.0
family = { kind = "additive" }           # or { kind = "saturated", saturation = 1.0 }
gains = { kind = "uniform" }             # or { kind = "modes", modes = [[0, 1]] } or { kind = "explicit", gains = [...] }

[constants]                  # optional K1..K9; unset entries derive from the model
# k1 = 1.0

[experiment]                 # exactly one kind
kind = "simulate"            # simulate | skeleton | rate | mdp-scaling | fw-probe | moments
                             # | lil-strassen | lil-classical | verify
epsilon = 0.01
samples = 1

# kind = "skeleton", control = { kind = "cosine", direction = 0, harmonic = 1, rate = 0.5 }
# controls: { kind = "zero" } | { kind = "constant", value = [...] }
#         | { kind = "cosine", direction, harmonic, rate } | { kind = "sines", amplitude, phase }
# kind = "rate", target = <control>, params = { feasibility_tol = 1e-4, energy_cap = 1e3,
#        mu_initial = 1.0, mu_growth = 10.0, mu_max = 1e14, softmax_sharpness = 20.0,
#        max_inner_iters = 400, inner_rtol = 1e-9 }
# kind = "mdp-scaling", radii = [...], epsilons = [...], samples = 1000,
#        speed = { kind = "log_log" } or { kind = "power", gamma = 0.25 }
# kind = "fw-probe", control = <control>, rho, eta, rate_exponent, increment_threshold,
#        depth, epsilons = [...], samples
# kind = "moments", epsilons = [...], p_list = [1.0, 2.0], samples, control = <control> (optional)
# kind = "lil-strassen", base, j_min, j_max, harmonics, levels = [...], tolerance, replicates
# kind = "lil-classical", base, j_min, j_max, replicates, horizons = [...], level
# kind = "verify", gradient_trials = 20, fixtures = 100
#
# Deviation experiments (mdp-scaling, fw-probe, moments, lil-*) require every
# epsilon below eps0 = min{1/(2K1^2), 1/(4K1), 1/(2K2), 1/(78K9)}.
"#;

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
seed = 5
output_dir = "a"
[grid]
k_max = 2
t_end = 0.1
dt = 0.01
[noise]
num_directions = 4
[experiment]
kind = "simulate"
epsilon = 0.01
"#;

    #[test]
    fn hash_ignores_key_order_and_output_paths() {
        let a = ExperimentConfig::from_toml(BASIC).unwrap();
        let reordered = r#"
output_dir = "somewhere/else"
workers = 3
[experiment]
epsilon = 0.01
kind = "simulate"
[noise]
num_directions = 4
[grid]
dt = 0.01
t_end = 0.1
k_max = 2
"#;
        let b = ExperimentConfig::from_toml(&format!("seed = 5\n{reordered}")).unwrap();
        assert_eq!(a.hash(), b.hash());
        let mut c = a.clone();
        c.seed = 6;
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn unknown_keys_are_all_listed() {
        let text = BASIC.replace("k_max = 2", "k_max = 2\nkmax = 3\nfoo = 1");
        match ExperimentConfig::from_toml(&text) {
            Err(HarnessError::Schema { keys, .. }) => {
                assert!(keys.iter().any(|k| k.contains("kmax")) && keys.iter().any(|k| k.contains("foo")), "{keys:?}");
            }
            other => panic!("{other:?}"),
        }
        assert!(ExperimentConfig::from_toml("[grid]\nk_max = 2").is_err());
    }

    #[test]
    fn deviation_grids_are_checked_against_eps0() {
        let text = BASIC.replace(
            "kind = \"simulate\"\nepsilon = 0.01",
            "kind = \"moments\"\nepsilons = [0.5, 0.01]\np_list = [1.0]\nsamples = 2",
        );
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        let sim = cfg.sim_config().unwrap();
        match cfg.check_admissible(&sim) {
            Err(HarnessError::Admissibility { epsilon, threshold_name, .. }) => {
                assert_eq!(epsilon, 0.5);
                assert!(threshold_name.contains("eps0"));
            }
            other => panic!("{other:?}"),
        }
        let ok = ExperimentConfig::from_toml(BASIC).unwrap();
        assert!(ok.check_admissible(&ok.sim_config().unwrap()).unwrap().is_none());
    }

    #[test]
    fn schema_text_parses() {
        let text: String = SCHEMA_TEXT.lines().filter(|l| !l.trim_start().starts_with('#')).collect::<Vec<_>>().join("\n");
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(cfg.experiment.name(), "simulate");
        cfg.sim_config().unwrap();
    }
}
