//! Mean field games on a finite state space with a bounded number of
//! Poisson common shocks.
//!
//! The equilibrium is parameterised by the vector of shock times seen so far.
//! [`lattice`] enumerates those vectors on a uniform grid, [`backward`] and
//! [`forward`] integrate the value and distribution equations over them, and
//! [`equilibrium`] iterates the two to a fixed point. [`bounds`] evaluates the
//! a priori constants and the truncation error, [`simulate`] checks solutions
//! by Monte Carlo and [`cli`] drives file-based runs.

pub mod backward;
pub mod bounds;
pub mod cli;
pub mod config;
pub mod equilibrium;
pub mod error;
pub mod field;
pub mod forward;
pub mod lattice;
pub mod model;
pub mod simulate;

pub use backward::solve_backward;
pub use bounds::{BoundsData, ConstantsReport, Lipschitz};
pub use equilibrium::{
    extract_policy, solve_equilibrium, system_residuals, EquilibriumSolution, InitialGuess,
    SolverOptions,
};
pub use error::{Error, Result, SolveError};
pub use field::Field;
pub use forward::solve_forward;
pub use lattice::{Lattice, ShockVector, TimeGrid};
pub use model::{CorruptionModel, CorruptionParams, GameModel, Model, TableModel, TableParams};
