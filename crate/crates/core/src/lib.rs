//! Multi-term time-fractional diffusion with Caputo-Fabrizio derivatives.
//!
//! * [`cf`]: the single-order operator, its L1 discretisation and the fast
//!   O(1)-memory recurrence, closed forms and a quadrature oracle.
//! * [`timestep`]: multi-term weights and per-node fast states.
//! * [`spectral`]: Legendre-Gauss-Lobatto bases on `[0, S]`.
//! * [`solver`]: the fully discrete march.
//! * [`bench`]: convergence and timing studies with report output.

pub mod bench;
pub mod cf;
pub mod cli;
pub mod error;
pub mod solver;
pub mod spectral;
pub mod timestep;

pub use cf::{FastCfState, FractionalOrder, SampledSignal, TimeGrid};
pub use error::{Error, Result};
pub use solver::{solve, LinearSolver, ProblemSpec, Solution};
pub use spectral::{ErrorNorms, GridFunction, ShiftedBasis};
pub use timestep::MultiTermOperator;
