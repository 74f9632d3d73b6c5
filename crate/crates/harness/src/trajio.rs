//! Binary trajectory files: `SNSETRJ1`, a little-endian `u64` header length,
//! a JSON header, then one record per stored state: the time followed by the
//! `4·(2K+1)²` coefficients `(Re û₁, Im û₁, Re û₂, Im û₂)` in grid order.

use serde::{Deserialize, Serialize};
use snse_core::solvers::{RunningFunctionals, Trajectory, TrajectoryKind};
use num_complex::Complex64;
use snse_core::spectral::{SpectralField, SpectralGrid};

use crate::error::HarnessError;

pub const MAGIC: &[u8; 8] = b"SNSETRJ1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryHeader {
    pub kind: TrajectoryKind,
    pub k_max: usize,
    pub n_phys: usize,
    pub records: usize,
    pub values_per_record: usize,
    pub epsilon: f64,
    pub seed: Option<u64>,
    pub config_hash: Option<String>,
    pub max_relative_divergence: f64,
    pub functionals: Vec<RunningFunctionals>,
}

pub fn encode(traj: &Trajectory, epsilon: f64) -> Vec<u8> {
    let grid = traj.initial().grid();
    let per = 4 * grid.len();
    let header = TrajectoryHeader {
        kind: traj.kind,
        k_max: grid.k_max(),
        n_phys: grid.n_phys(),
        records: traj.len(),
        values_per_record: 1 + per,
        epsilon,
        seed: traj.provenance.seed,
        config_hash: traj.provenance.config_hash.clone(),
        max_relative_divergence: traj.max_relative_divergence,
        functionals: traj.functionals.clone(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(16 + json.len() + 8 * traj.len() * (1 + per));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for (t, f) in traj.times.iter().zip(&traj.fields) {
        out.extend_from_slice(&t.to_le_bytes());
        for c in f.to_record().coeffs {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    out
}

pub struct DecodedTrajectory {
    pub header: TrajectoryHeader,
    pub times: Vec<f64>,
    pub fields: Vec<SpectralField>,
}

pub fn decode(bytes: &[u8]) -> Result<DecodedTrajectory, HarnessError> {
    let bad = |m: &str| HarnessError::Runtime(format!("malformed trajectory file: {m}"));
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(bad("missing SNSETRJ1 magic"));
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let body_start = 16usize.checked_add(len).filter(|&e| e <= bytes.len()).ok_or_else(|| bad("truncated header"))?;
    let header: TrajectoryHeader = serde_json::from_slice(&bytes[16..body_start]).map_err(|e| bad(&e.to_string()))?;
    let body = &bytes[body_start..];
    if body.len() != 8 * header.records * header.values_per_record {
        return Err(bad("body size does not match the header"));
    }
    let values: Vec<f64> = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    let grid = SpectralGrid::new(header.k_max, header.n_phys).map_err(|e| bad(&e.to_string()))?;
    if header.values_per_record != 1 + 4 * grid.len() {
        return Err(bad("record length does not match the grid"));
    }
    let mut times = Vec::with_capacity(header.records);
    let mut fields = Vec::with_capacity(header.records);
    for rec in values.chunks_exact(header.values_per_record) {
        times.push(rec[0]);
        // stored coefficients are already divergence-free; copy them verbatim
        let mut f = SpectralField::zeros(&grid);
        for (a, c) in f.coeffs_mut_unchecked().iter_mut().zip(rec[1..].chunks_exact(4)) {
            *a = [Complex64::new(c[0], c[1]), Complex64::new(c[2], c[3])];
        }
        fields.push(f);
    }
    Ok(DecodedTrajectory { header, times, fields })
}
