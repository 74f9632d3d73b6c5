//! Truncated Fourier grid on the periodic square `[0, 2π)²`.
//!
//! Coefficients are stored densely over the `(2K+1) × (2K+1)` block of
//! wavevectors with `|k|∞ ≤ K`. The centre slot (the mean) is always zero.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::SpectralError;

/// Integer wavevector `(kx, ky)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Wavevector {
    pub kx: i32,
    pub ky: i32,
}

impl Wavevector {
    pub const fn new(kx: i32, ky: i32) -> Self {
        Self { kx, ky }
    }

    pub fn norm_sq(self) -> f64 {
        f64::from(self.kx * self.kx + self.ky * self.ky)
    }

    pub fn neg(self) -> Self {
        Self::new(-self.kx, -self.ky)
    }

    pub fn is_zero(self) -> bool {
        self.kx == 0 && self.ky == 0
    }

    /// One representative per `±k` pair: `kx > 0`, or `kx == 0 && ky > 0`.
    pub fn is_representative(self) -> bool {
        self.kx > 0 || (self.kx == 0 && self.ky > 0)
    }
}

impl fmt::Display for Wavevector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.kx, self.ky)
    }
}

struct FftPair {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Truncation `K` plus physical resolution `N`; cheap to clone.
#[derive(Clone)]
pub struct SpectralGrid {
    k_max: usize,
    n_phys: usize,
    fft: Arc<FftPair>,
}

impl fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralGrid")
            .field("k_max", &self.k_max)
            .field("n_phys", &self.n_phys)
            .finish()
    }
}

impl PartialEq for SpectralGrid {
    fn eq(&self, other: &Self) -> bool {
        self.k_max == other.k_max && self.n_phys == other.n_phys
    }
}

impl Eq for SpectralGrid {}

impl SpectralGrid {
    pub fn new(k_max: usize, n_phys: usize) -> Result<Self, SpectralError> {
        if k_max == 0 {
            return Err(SpectralError::InvalidGrid("max wavenumber must be at least 1".into()));
        }
        if n_phys < 2 * (k_max + 1) {
            return Err(SpectralError::InvalidGrid(format!(
                "physical resolution {n_phys} below 2(K+1) = {}",
                2 * (k_max + 1)
            )));
        }
        let mut planner = FftPlanner::new();
        let fft = FftPair {
            forward: planner.plan_fft_forward(n_phys),
            inverse: planner.plan_fft_inverse(n_phys),
        };
        Ok(Self { k_max, n_phys, fft: Arc::new(fft) })
    }

    /// Smallest admissible resolution for exact quadratic products: `N ≥ 3K + 1`, rounded up to even.
    pub fn dealiased(k_max: usize) -> Result<Self, SpectralError> {
        let n = 3 * k_max + 1;
        Self::new(k_max, n + n % 2)
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn n_phys(&self) -> usize {
        self.n_phys
    }

    /// Side length `2K + 1` of the coefficient block.
    pub fn side(&self) -> usize {
        2 * self.k_max + 1
    }

    /// Number of coefficient slots, including the (always zero) mean.
    pub fn len(&self) -> usize {
        self.side() * self.side()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of nonzero wavevectors.
    pub fn num_modes(&self) -> usize {
        self.len() - 1
    }

    /// True when quadratic products are formed without aliasing into retained modes.
    pub fn supports_products(&self) -> bool {
        self.n_phys > 3 * self.k_max
    }

    pub fn contains(&self, k: Wavevector) -> bool {
        let km = self.k_max as i32;
        k.kx.abs() <= km && k.ky.abs() <= km
    }

    pub fn index(&self, k: Wavevector) -> usize {
        debug_assert!(self.contains(k));
        let km = self.k_max as i32;
        ((k.kx + km) as usize) * self.side() + (k.ky + km) as usize
    }

    pub fn wavevector(&self, idx: usize) -> Wavevector {
        let km = self.k_max as i32;
        let s = self.side();
        Wavevector::new((idx / s) as i32 - km, (idx % s) as i32 - km)
    }

    pub fn zero_index(&self) -> usize {
        self.index(Wavevector::new(0, 0))
    }

    /// All nonzero wavevectors with their storage index.
    pub fn modes(&self) -> impl Iterator<Item = (usize, Wavevector)> + '_ {
        (0..self.len())
            .map(|i| (i, self.wavevector(i)))
            .filter(|(_, k)| !k.is_zero())
    }

    /// Storage index of `-k` for the slot `idx`.
    pub fn mirror(&self, idx: usize) -> usize {
        self.len() - 1 - idx
    }

    /// Physical grid spacing.
    pub fn spacing(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.n_phys as f64
    }

    fn fft_slot(&self, k: Wavevector) -> usize {
        let n = self.n_phys as i32;
        (k.kx.rem_euclid(n) as usize) * self.n_phys + k.ky.rem_euclid(n) as usize
    }

    /// Evaluates `Σ_k c_k e^{ik·x}` on the `N × N` grid; the result is complex
    /// so two real fields can share one transform (`f + i g`).
    pub(crate) fn synthesize(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let n = self.n_phys;
        let mut buf = vec![Complex64::new(0.0, 0.0); n * n];
        for (i, k) in self.modes() {
            buf[self.fft_slot(k)] = coeffs[i];
        }
        self.fft2(&mut buf, &self.fft.inverse);
        buf
    }

    /// Fourier coefficients `(1/N²) Σ_x f(x) e^{-ik·x}` for the retained block.
    pub(crate) fn analyze(&self, values: Vec<Complex64>) -> Vec<Complex64> {
        let n = self.n_phys;
        let mut buf = values;
        self.fft2(&mut buf, &self.fft.forward);
        let scale = 1.0 / (n * n) as f64;
        let mut out = vec![Complex64::new(0.0, 0.0); self.len()];
        for (i, k) in self.modes() {
            out[i] = buf[self.fft_slot(k)] * scale;
        }
        out
    }

    fn fft2(&self, buf: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n_phys;
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(buf, &mut scratch);
        transpose_square(buf, n);
        plan.process_with_scratch(buf, &mut scratch);
        transpose_square(buf, n);
    }
}

fn transpose_square(buf: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_coarse_resolution() {
        assert!(SpectralGrid::new(4, 9).is_err());
        assert!(SpectralGrid::new(0, 8).is_err());
        assert!(SpectralGrid::new(4, 10).is_ok());
    }

    #[test]
    fn index_roundtrip_and_mirror() {
        let g = SpectralGrid::new(3, 10).unwrap();
        for i in 0..g.len() {
            let k = g.wavevector(i);
            assert_eq!(g.index(k), i);
            assert_eq!(g.wavevector(g.mirror(i)), k.neg());
        }
        assert_eq!(g.modes().count(), 48);
    }

    #[test]
    fn dealiasing_margin() {
        assert!(SpectralGrid::new(10, 32).unwrap().supports_products());
        assert!(!SpectralGrid::new(10, 30).unwrap().supports_products());
        assert!(SpectralGrid::dealiased(7).unwrap().supports_products());
    }

    #[test]
    fn synthesize_then_analyze_recovers_coefficients() {
        let g = SpectralGrid::new(4, 12).unwrap();
        let mut c = vec![Complex64::new(0.0, 0.0); g.len()];
        c[g.index(Wavevector::new(2, -1))] = Complex64::new(0.3, -0.7);
        c[g.index(Wavevector::new(-4, 4))] = Complex64::new(-1.0, 0.25);
        let back = g.analyze(g.synthesize(&c));
        for (a, b) in c.iter().zip(&back) {
            assert!((a - b).norm() < 1e-14);
        }
    }
}
