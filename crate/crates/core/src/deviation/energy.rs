use super::DeviationError;
use crate::solvers::Trajectory;
use crate::spectral::SpectralField;

/// `(sup_m |u_m|² + Σ_{m<M} ‖u_m‖² (t_{m+1} − t_m))^{1/2}` over recorded states.
pub fn energy_norm_of(times: &[f64], fields: &[SpectralField]) -> f64 {
    energy_norm_by(times, fields.len(), |m| fields[m].clone())
}

fn energy_norm_by(times: &[f64], len: usize, field: impl Fn(usize) -> SpectralField) -> f64 {
    let mut sup: f64 = 0.0;
    let mut int = 0.0;
    for m in 0..len {
        let u = field(m);
        sup = sup.max(u.h_norm_sq());
        if m + 1 < len {
            int += u.v_norm_sq() * (times[m + 1] - times[m]);
        }
    }
    (sup + int).sqrt()
}

/// `‖u‖_{𝓔(T)}` with the left-endpoint rule on the recording grid.
pub fn energy_norm(traj: &Trajectory) -> f64 {
    energy_norm_of(&traj.times, &traj.fields)
}

/// `‖a − b‖_{𝓔(T)}` for trajectories recorded on the same times.
pub fn energy_distance(a: &Trajectory, b: &Trajectory) -> Result<f64, DeviationError> {
    if a.times.len() != b.times.len() || a.times.iter().zip(&b.times).any(|(x, y)| (x - y).abs() > 1e-12 * x.abs().max(1.0)) {
        return Err(DeviationError::Mismatch("trajectories recorded on different times".into()));
    }
    Ok(energy_norm_by(&a.times, a.len(), |m| a.fields[m].sub(&b.fields[m])))
}

/// `‖u(t) − u(t_i^n)‖_{𝓔(T)}` where `t_i^n = iT/2ⁿ` is the dyadic left
/// neighbour of `t`; the final point `T` belongs to the last cell.
pub fn dyadic_increment_stat(traj: &Trajectory, depth: u32) -> Result<f64, DeviationError> {
    let intervals = traj.len() - 1;
    let cells = 1usize.checked_shl(depth).filter(|&c| c <= intervals.max(1)).ok_or_else(|| {
        DeviationError::Parameter(format!("depth {depth} is finer than the {intervals} recorded intervals"))
    })?;
    if intervals == 0 {
        return Ok(0.0);
    }
    if intervals % cells != 0 {
        return Err(DeviationError::Parameter(format!(
            "2^{depth} dyadic cells do not align with {intervals} recorded intervals"
        )));
    }
    let width = intervals / cells;
    let anchor = |m: usize| (m / width).min(cells - 1) * width;
    Ok(energy_norm_by(&traj.times, traj.len(), |m| traj.fields[m].sub(&traj.fields[anchor(m)])))
}
