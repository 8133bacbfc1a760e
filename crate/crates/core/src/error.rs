use thiserror::Error;

use crate::lattice::LatticeError;
use crate::model::ModelError;

/// Failures of the backward and forward integrators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("shock group {0} was not solved before it was needed")]
    MissingLevel(usize),
    #[error("value {value} at node {node}, time index {time} exceeds the blow-up bound {bound}")]
    BlowUp {
        node: usize,
        time: usize,
        value: f64,
        bound: f64,
    },
    #[error("mass {value} in state {state} at node {node}, time index {time} is below -1e-7")]
    NegativeMass {
        node: usize,
        time: usize,
        state: usize,
        value: f64,
    },
    #[error("field does not match the model or lattice: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Any error surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("fixed-point iteration stopped after {iterations} iterations with residual {residual:e}")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Simulation(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
