//! Numerical laboratory for the stochastic heat equation
//!
//! ```text
//! ∂_t u = ½ ∂_xx u + b(u) + σ(u) Ẇ,   x ∈ [0, 1],   u(t, 0) = u(t, 1) = 0,
//! ```
//!
//! driven by space-time white noise, with drifts of `|u| log |u|` growth.
//! The crate solves the equation in mild form with a spectral
//! exponential-Euler scheme and ships executable checks for the heat-kernel
//! estimates, Gronwall-type inequalities, coefficient hypotheses and moment
//! bounds that the well-posedness theory relies on.

pub mod coefficients;
pub mod error;
pub mod gronwall;
pub mod heat_kernel;
pub mod moments;
pub mod noise;
pub mod quad;
pub mod solver;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
pub use spectral::{Field, SineBasis};
