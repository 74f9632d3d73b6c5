//! Slow reference evaluators by direct summation of the Fourier series and
//! trapezoidal quadrature on an `M × M` grid. No FFTs and no triad
//! convolution are involved, so these serve as an independent check of the
//! fast paths. Quadrature of a cubic product is exact once `M > 3K`.

use num_complex::Complex64;

use super::field::{Amplitude, SpectralField};
use super::grid::SpectralGrid;

/// `e^{i k x_m}` for `k ∈ [−K, K]`, `x_m = 2πm/M`.
fn phase_table(k_max: usize, m: usize) -> Vec<Vec<Complex64>> {
    let km = k_max as i64;
    (-km..=km)
        .map(|k| {
            (0..m)
                .map(|j| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * (k * j as i64) as f64 / m as f64))
                .collect()
        })
        .collect()
}

/// Point values of `Σ_k c_k(a) e^{ik·x}` for a per-mode weighting `c`.
fn evaluate_with(u: &SpectralField, m: usize, weight: impl Fn(i32, i32, Amplitude) -> Amplitude) -> [Vec<f64>; 2] {
    let grid = u.grid();
    let km = grid.k_max() as i32;
    let table = phase_table(grid.k_max(), m);
    let mut out = [vec![0.0; m * m], vec![0.0; m * m]];
    for (i, k) in grid.modes() {
        let a = weight(k.kx, k.ky, u.coeffs()[i]);
        if a[0].norm_sqr() + a[1].norm_sqr() == 0.0 {
            continue;
        }
        let ex = &table[(k.kx + km) as usize];
        let ey = &table[(k.ky + km) as usize];
        for ix in 0..m {
            for iy in 0..m {
                let ph = ex[ix] * ey[iy];
                out[0][ix * m + iy] += (a[0] * ph).re;
                out[1][ix * m + iy] += (a[1] * ph).re;
            }
        }
    }
    out
}

pub fn evaluate(u: &SpectralField, m: usize) -> [Vec<f64>; 2] {
    evaluate_with(u, m, |_, _, a| a)
}

/// `[∂ₓu, ∂ᵧu]`, each a pair of components.
pub fn gradient(u: &SpectralField, m: usize) -> [[Vec<f64>; 2]; 2] {
    let dx = evaluate_with(u, m, |kx, _, a| {
        let ik = Complex64::new(0.0, f64::from(kx));
        [a[0] * ik, a[1] * ik]
    });
    let dy = evaluate_with(u, m, |_, ky, a| {
        let ik = Complex64::new(0.0, f64::from(ky));
        [a[0] * ik, a[1] * ik]
    });
    [dx, dy]
}

/// `∫ uᵢ ∂ᵢvⱼ wⱼ dx` by trapezoidal quadrature.
pub fn trilinear(u: &SpectralField, v: &SpectralField, w: &SpectralField, m: usize) -> f64 {
    let uu = evaluate(u, m);
    let ww = evaluate(w, m);
    let [dx, dy] = gradient(v, m);
    let h = 2.0 * std::f64::consts::PI / m as f64;
    let mut s = 0.0;
    for p in 0..m * m {
        for j in 0..2 {
            s += (uu[0][p] * dx[j][p] + uu[1][p] * dy[j][p]) * ww[j][p];
        }
    }
    s * h * h
}

/// Retained Fourier amplitudes of `(u·∇)v` by direct quadrature, without projection.
pub fn advection_unprojected(u: &SpectralField, v: &SpectralField, m: usize) -> Vec<Amplitude> {
    let grid = u.grid();
    let uu = evaluate(u, m);
    let [dx, dy] = gradient(v, m);
    let n: Vec<[f64; 2]> = (0..m * m)
        .map(|p| {
            [uu[0][p] * dx[0][p] + uu[1][p] * dy[0][p], uu[0][p] * dx[1][p] + uu[1][p] * dy[1][p]]
        })
        .collect();
    let table = phase_table(grid.k_max(), m);
    let km = grid.k_max() as i32;
    let scale = 1.0 / (m * m) as f64;
    let mut out = vec![[Complex64::new(0.0, 0.0); 2]; grid.len()];
    for (i, k) in grid.modes() {
        let ex = &table[(k.kx + km) as usize];
        let ey = &table[(k.ky + km) as usize];
        let mut acc = [Complex64::new(0.0, 0.0); 2];
        for ix in 0..m {
            for iy in 0..m {
                let ph = (ex[ix] * ey[iy]).conj();
                acc[0] += ph * n[ix * m + iy][0];
                acc[1] += ph * n[ix * m + iy][1];
            }
        }
        out[i] = [acc[0] * scale, acc[1] * scale];
    }
    out
}

/// Quadrature resolution that integrates cubic products exactly.
pub fn exact_resolution(grid: &SpectralGrid) -> usize {
    3 * grid.k_max() + 1
}

/// `P_H((u·∇)v)` via [`advection_unprojected`] at an exact resolution.
pub fn bilinear(u: &SpectralField, v: &SpectralField) -> SpectralField {
    let raw = advection_unprojected(u, v, exact_resolution(u.grid()));
    SpectralField::project_leray(u.grid(), raw).expect("quadrature of a real product is real")
}
