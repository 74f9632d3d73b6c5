//! Spectral simulator and analysis toolkit for the 2D incompressible
//! stochastic Navier–Stokes equations on the periodic torus.
//!
//! * [`spectral`]: divergence-free Fourier fields and the operators `A`, `B`, `b`.
//! * [`noise`]: Q-Wiener increments, noise coefficients `σ(t, u)`, controls.
//! * [`solvers`]: deterministic, stochastic, skeleton and shifted-process integrators.
//! * [`deviation`]: rate functional, Monte Carlo deviation estimators, moment bounds.
//! * [`lil`]: iterated-logarithm studies.

pub mod spectral;
pub mod noise;
pub mod rng;
pub mod solvers;
pub mod deviation;
pub mod lil;
