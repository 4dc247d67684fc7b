//! Diffusion approximations for Thompson sampling.
//!
//! Under gaps of order `1/sqrt(n)` the occupation and noise processes of
//! Thompson sampling, rescaled to `[0, 1]`, evolve like discretised SDEs and
//! random ODEs. This crate simulates the exact finite-`n` systems, integrates
//! their limits, and provides the statistics used to compare the two.
//!
//! - [`model`]: bandit instances and validation.
//! - [`kernel`]: the arm-selection probability functions.
//! - [`discrete`]: finite-`n` Thompson sampling in its SDE and ODE forms.
//! - [`limit`]: Euler–Maruyama and random-ODE solvers for the limits.
//! - [`analysis`]: empirical distributions, KS distances and path validators.
//! - [`experiment`]: seeded replication sweeps and result files.

pub mod analysis;
pub mod discrete;
pub mod error;
pub mod experiment;
mod io;
pub mod kernel;
pub mod limit;
pub mod linalg;
pub mod model;
pub mod quadrature;
pub mod rng;
pub mod special;

pub use error::{Error, Result};
pub use kernel::{
    gamma_k_arm, gamma_sigma, gamma_two_arm, lambda_linear, mc_oracle, Kernel, KernelKind,
    OracleEstimate, PosteriorSummary,
};
pub use model::{
    validate_spec, BanditMode, BanditSpec, HorizonSpec, KernelPoint, VarianceMode, Violation,
};
