//! Traveling-wave laboratory for the thin-film equation with Navier slip.
//!
//! The rescaled wave profile solves `phi * phi''' = 1` on `[0, d]` with
//! `phi(0) = phi(d) = 0`, `phi'(0) = 1`, which forces `d = 1/2`. This crate
//! computes that profile three independent ways, checks it against the
//! explicit envelope `A * eta * (d - eta)^{3/2}`, and simulates the moving-frame
//! evolution to audit the energy balance.
//!
//! Module map:
//!
//! - [`green_kernel`]: closed-form Green's kernel, integrals, sign oracle.
//! - [`profile`]: kernel fixed-point iteration, shooting, Newton collocation.
//! - [`bounds`]: envelope bounds, coefficient gates, edge asymptotics.
//! - [`simulator`]: conservative implicit scheme for the moving-frame PDE.
//! - [`cli`] and [`validation`]: the `ridgewave` front end and its check ledger.

pub mod banded;
pub mod bounds;
pub mod cli;
pub mod error;
pub mod fd;
pub mod green_kernel;
pub mod grid;
pub mod io;
pub mod ode;
pub mod profile;
pub mod quadrature;
pub mod simulator;
pub mod validation;

pub use error::{Error, Result};
pub use grid::{Grading, Grid};
pub use profile::{Method, Profile};

/// Ridge half-width in rescaled units, forced by the first integral.
pub const D_TRAVELING: f64 = 0.5;

/// Receding-edge coefficient `lim phi / (d - eta)^{3/2} = sqrt(8/3)`.
pub const EDGE_COEFFICIENT: f64 = 1.632_993_161_855_452;
