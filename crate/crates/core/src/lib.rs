//! Neural signed distance fields fitted to point clouds with a screened-Poisson
//! heat loss, plus the numerical oracles used to check the underlying theory.
//!
//! The crate is organised by concern:
//!
//! - [`geometry`]: analytic shapes, exact signed distances, boundary sampling,
//!   grids and level-set extraction.
//! - [`field`]: the MLP field with joint value / input-gradient evaluation,
//!   parameter gradients through gradient-dependent losses, and Adam.
//! - [`losses`]: Monte Carlo loss estimators and schedules.
//! - [`oracles`]: closed-form screened-Poisson solutions, Bessel K0, the
//!   multi-point distance bounds, a finite-difference solver and the
//!   gradient-flow stability simulator.
//! - [`trainer`]: the optimisation loop, checkpoints and the 1D demonstration.
//! - [`eval`]: metrics, sphere tracing and image output.

pub mod config;
pub mod error;
pub mod eval;
pub mod field;
pub mod geometry;
pub mod losses;
pub mod oracles;
pub mod parallel;
pub mod rng;
pub mod trainer;
pub mod validate;

pub use error::{Error, Result};
