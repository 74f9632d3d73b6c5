//! Divergence-free Fourier representation of 2D velocity fields on the
//! periodic torus `[0, 2π)²`, with the Stokes operator, Leray projection,
//! the advection term and the norms `|·|`, `‖·‖` and `‖·‖_{L⁴}`.
//!
//! Norm conventions: `|u|² = ∫|u|² dx = 4π² Σ|û_k|²` and
//! `‖u‖² = 4π² Σ|k|²|û_k|²`. Mean-zero fields give `‖u‖ ≥ |u|`.

mod field;
mod grid;
mod ops;
pub mod reference;

use thiserror::Error;

pub use field::{Amplitude, FieldRecord, NormBundle, SpectralField, VorticityField};
pub use grid::{SpectralGrid, Wavevector};
pub use ops::{advection_transpose, bilinear, trilinear};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid K={k_max}, N={n_phys} cannot form dealiased products (need N > 3K)")]
    Dealiasing { k_max: usize, n_phys: usize },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("coefficient array has length {found}, expected {expected}")]
    Shape { expected: usize, found: usize },
    #[error("amplitudes at {0} break conjugate symmetry; not the spectrum of a real field")]
    NotReal(Wavevector),
    #[error("wavevector {0} is outside the retained block")]
    ModeOutOfRange(Wavevector),
}
