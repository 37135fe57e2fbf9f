//! A numerical laboratory for the stochastically forced compressible
//! Navier–Stokes system with a hard-sphere pressure law, in one space
//! dimension with no-slip walls.
//!
//! The crate is split along the physics:
//!
//! * [`eos`] — hard-sphere pressure, its potential and the capped
//!   regularization.
//! * [`forcing`] — truncated cylindrical Wiener noise, diffusion
//!   coefficients and deterministic forces.
//! * [`solver`] — staggered upwind finite-volume scheme with implicit
//!   viscosity and Euler–Maruyama noise, plus checkpoints.
//! * [`analysis`] — energies, Bogovskii operator, energy-inequality and
//!   renormalization residuals, Gronwall envelopes, moment series.
//! * [`stationarity`] — time shifts, Krylov–Bogoliubov averages and
//!   stationarity diagnostics.
//! * [`harness`] — configuration, seed splitting, ensemble execution and
//!   CSV/JSON outputs.
//!
//! Ensembles run on rayon when the `parallel` feature is enabled (the
//! default) and sequentially otherwise; results are identical either way.

pub mod analysis;
pub mod eos;
pub mod error;
pub mod forcing;
pub mod harness;
pub mod parallel;
pub mod quadrature;
pub mod rng;
pub mod solver;
pub mod stationarity;
pub mod tridiag;

pub use error::{Error, Result};
