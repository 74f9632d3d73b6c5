//! Nonlinear terms: the projected advection `B(u, v) = P_H((u·∇)v)`, its
//! transpose in the last two slots, and the trilinear form `b(u, v, w)`.

use num_complex::Complex64;

use super::field::{Amplitude, SpectralField};
use super::grid::SpectralGrid;
use super::SpectralError;

const TORUS_AREA: f64 = 4.0 * std::f64::consts::PI * std::f64::consts::PI;

fn check_product_grid(a: &SpectralGrid, b: &SpectralGrid) -> Result<(), SpectralError> {
    if a != b {
        return Err(SpectralError::GridMismatch);
    }
    if !a.supports_products() {
        return Err(SpectralError::Dealiasing { k_max: a.k_max(), n_phys: a.n_phys() });
    }
    Ok(())
}

fn packed(coeffs: &[Amplitude], f: impl Fn(usize, Amplitude) -> Amplitude) -> Vec<Complex64> {
    coeffs
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            let b = f(i, a);
            b[0] + b[1] * Complex64::i()
        })
        .collect()
}

/// Physical `(∂ₓv₁ + i∂ₓv₂, ∂ᵧv₁ + i∂ᵧv₂)`.
fn packed_gradients(v: &SpectralField) -> (Vec<Complex64>, Vec<Complex64>) {
    let grid = v.grid();
    let dx = packed(v.coeffs(), |i, a| {
        let ik = Complex64::new(0.0, f64::from(grid.wavevector(i).kx));
        [a[0] * ik, a[1] * ik]
    });
    let dy = packed(v.coeffs(), |i, a| {
        let ik = Complex64::new(0.0, f64::from(grid.wavevector(i).ky));
        [a[0] * ik, a[1] * ik]
    });
    (grid.synthesize(&dx), grid.synthesize(&dy))
}

fn finish(grid: &SpectralGrid, physical: Vec<Complex64>) -> SpectralField {
    let mut out = SpectralField::zeros(grid);
    out.set_from_packed(grid.analyze(physical));
    out.leray_in_place();
    out
}

/// `B(u, v) = P_H((u·∇)v)`, pseudo-spectral with the 2/3 truncation.
pub fn bilinear(u: &SpectralField, v: &SpectralField) -> Result<SpectralField, SpectralError> {
    check_product_grid(u.grid(), v.grid())?;
    let grid = u.grid();
    let uu = grid.synthesize(&packed(u.coeffs(), |_, a| a));
    let (gx, gy) = packed_gradients(v);
    let prod = uu.iter().zip(gx.iter().zip(&gy)).map(|(w, (px, py))| px * w.re + py * w.im).collect();
    Ok(finish(grid, prod))
}

/// `P_H((∇w)ᵀ y)`, i.e. the field `z` with `(z, x) = b(x, w, y)` for every `x`.
///
/// This is the H-adjoint of `x ↦ B(x, w)`.
pub fn advection_transpose(w: &SpectralField, y: &SpectralField) -> Result<SpectralField, SpectralError> {
    check_product_grid(w.grid(), y.grid())?;
    let grid = w.grid();
    let yy = grid.synthesize(&packed(y.coeffs(), |_, a| a));
    let (gx, gy) = packed_gradients(w);
    let prod = yy
        .iter()
        .zip(gx.iter().zip(&gy))
        .map(|(yv, (px, py))| Complex64::new((px.conj() * yv).re, (py.conj() * yv).re))
        .collect();
    Ok(finish(grid, prod))
}

/// `b(u, v, w) = Σᵢⱼ ∫ uᵢ ∂ᵢvⱼ wⱼ dx` by direct convolution over the triads
/// `p + q + r = 0`.
pub fn trilinear(u: &SpectralField, v: &SpectralField, w: &SpectralField) -> f64 {
    assert!(u.grid() == v.grid() && v.grid() == w.grid(), "grid mismatch");
    let grid = u.grid();
    let (uc, vc, wc) = (u.coeffs(), v.coeffs(), w.coeffs());
    let mut acc = Complex64::new(0.0, 0.0);
    for (ip, p) in grid.modes() {
        let up = uc[ip];
        if up[0].norm_sqr() + up[1].norm_sqr() == 0.0 {
            continue;
        }
        for (iq, q) in grid.modes() {
            let r = super::Wavevector::new(-p.kx - q.kx, -p.ky - q.ky);
            if r.is_zero() || !grid.contains(r) {
                continue;
            }
            let ir = grid.index(r);
            let adv = Complex64::i() * (up[0] * f64::from(q.kx) + up[1] * f64::from(q.ky));
            let vq = vc[iq];
            let wr = wc[ir];
            acc += adv * (vq[0] * wr[0] + vq[1] * wr[1]);
        }
    }
    TORUS_AREA * acc.re
}
