//! Python bindings: configuration, equilibrium solves, Monte-Carlo checks
//! and the a priori constants.

use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use shockmfg::bounds;
use shockmfg::config::RunConfig;
use shockmfg::{
    extract_policy, solve_equilibrium, system_residuals, EquilibriumSolution, Field, GameModel, Model,
    ShockVector,
};

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn json_to_py<'py>(py: Python<'py>, v: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(err)?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Run configuration. Takes the same JSON document as the command line tool
/// plus `key=value` overrides with dotted keys.
#[pyclass(name = "Config", module = "shockmfg", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyConfig {
    cfg: RunConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (json=None, overrides=Vec::new()))]
    fn new(json: Option<&str>, overrides: Vec<String>) -> PyResult<Self> {
        Ok(Self {
            cfg: RunConfig::load(json, &overrides).map_err(err)?,
        })
    }

    /// Copy with further overrides applied.
    fn with_overrides(&self, overrides: Vec<String>) -> PyResult<Self> {
        let text = serde_json::to_string(&self.cfg).map_err(err)?;
        Self::new(Some(&text), overrides)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.cfg).map_err(err)
    }

    #[getter]
    fn horizon(&self) -> f64 {
        self.cfg.grid.horizon
    }

    #[getter]
    fn steps(&self) -> usize {
        self.cfg.grid.steps
    }

    #[getter]
    fn shocks(&self) -> PyResult<usize> {
        self.cfg.shock_cap().map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(horizon={}, steps={}, shocks={:?})",
            self.cfg.grid.horizon, self.cfg.grid.steps, self.cfg.grid.shocks
        )
    }
}

/// A solved equilibrium together with the model it was solved for.
#[pyclass(name = "Solution", module = "shockmfg", frozen)]
struct PySolution {
    model: Model,
    sol: EquilibriumSolution,
}

impl PySolution {
    fn node(&self, shocks: Vec<usize>) -> PyResult<usize> {
        let lat = self.sol.lattice();
        let u = ShockVector::from_indices(lat.cap(), &shocks).map_err(err)?;
        lat.node_of(&u)
            .ok_or_else(|| PyKeyError::new_err(format!("no lattice node for shock indices {shocks:?}")))
    }

    /// Rows of `f` at the node, one per grid index from the node start.
    fn rows(&self, f: &Field, shocks: Vec<usize>) -> PyResult<Vec<Vec<f64>>> {
        let id = self.node(shocks)?;
        Ok(f.node_values(id).chunks(f.states()).map(<[f64]>::to_vec).collect())
    }
}

#[pymethods]
impl PySolution {
    #[getter]
    fn converged(&self) -> bool {
        self.sol.converged
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.sol.iterations
    }

    #[getter]
    fn residual_history(&self) -> Vec<f64> {
        self.sol.residual_history.clone()
    }

    #[getter]
    fn final_residual(&self) -> f64 {
        self.sol.final_residual()
    }

    #[getter]
    fn contraction_estimate(&self) -> Option<f64> {
        self.sol.contraction_estimate
    }

    #[getter]
    fn state_names(&self) -> Vec<String> {
        self.model.state_names()
    }

    #[getter]
    fn level_sizes(&self) -> Vec<usize> {
        self.sol.lattice().level_sizes()
    }

    #[getter]
    fn times(&self) -> Vec<f64> {
        let g = self.sol.lattice().grid();
        (0..=g.steps()).map(|m| g.node(m)).collect()
    }

    /// Value of the representative agent at time zero under the initial law.
    fn initial_value(&self) -> f64 {
        self.sol.initial_value(self.model.initial_distribution())
    }

    /// Distribution rows at the node whose shocks fell at the given grid
    /// indices; the empty list is the root.
    #[pyo3(signature = (shocks=Vec::new()))]
    fn mu(&self, shocks: Vec<usize>) -> PyResult<Vec<Vec<f64>>> {
        self.rows(&self.sol.mu, shocks)
    }

    #[pyo3(signature = (shocks=Vec::new()))]
    fn v(&self, shocks: Vec<usize>) -> PyResult<Vec<Vec<f64>>> {
        self.rows(&self.sol.v, shocks)
    }

    /// Optimal actions at the node, per grid index and state.
    #[pyo3(signature = (shocks=Vec::new()))]
    fn policy(&self, shocks: Vec<usize>) -> PyResult<Vec<Vec<f64>>> {
        let pol = extract_policy(&self.sol, &self.model).map_err(err)?;
        self.rows(&pol, shocks)
    }

    fn system_residuals<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let r = system_residuals(&self.model, &self.sol.mu, &self.sol.v).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("value_step", r.value_step)?;
        d.set_item("distribution_step", r.distribution_step)?;
        d.set_item("terminal", r.terminal)?;
        d.set_item("initial", r.initial)?;
        d.set_item("relocation", r.relocation)?;
        Ok(d)
    }

    /// Monte-Carlo value estimate, returned as `(estimate, std_error)`.
    #[pyo3(signature = (paths=100_000, seed=0))]
    fn mc_value(&self, py: Python<'_>, paths: usize, seed: u64) -> (f64, f64) {
        let r = py.detach(|| shockmfg::simulate::mc_value(&self.model, &self.sol, paths, seed));
        (r.estimate, r.std_error)
    }

    /// Same estimate by importance sampling from the reference measure.
    #[pyo3(signature = (paths=100_000, seed=0))]
    fn mc_value_reference(&self, py: Python<'_>, paths: usize, seed: u64) -> (f64, f64) {
        let r = py.detach(|| shockmfg::simulate::mc_value_reference(&self.model, &self.sol, paths, seed));
        (r.estimate, r.std_error)
    }

    /// Time-averaged state shares over sampled shock paths, as
    /// `(shares, std_errors)`.
    #[pyo3(signature = (paths=20_000, seed=0))]
    fn time_average_shares(&self, py: Python<'_>, paths: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let r = py.detach(|| shockmfg::simulate::time_average_shares(&self.model, &self.sol, paths, seed));
        (r.shares, r.std_errors)
    }

    fn __repr__(&self) -> String {
        format!(
            "Solution(converged={}, iterations={}, residual={:e})",
            self.sol.converged,
            self.sol.iterations,
            self.sol.final_residual()
        )
    }
}

/// Solves the fixed point for a configuration. Does not raise when the
/// iteration stops unconverged; check `Solution.converged`.
#[pyfunction]
fn solve(py: Python<'_>, config: &PyConfig) -> PyResult<PySolution> {
    let cfg = &config.cfg;
    let model = cfg.build_model().map_err(err)?;
    let grid = cfg.time_grid().map_err(err)?;
    let opts = cfg.solver_options();
    let sol = py
        .detach(|| solve_equilibrium(&model, grid, &opts))
        .map_err(err)?;
    Ok(PySolution { model, sol })
}

/// A priori constants for the configuration as a dict.
#[pyfunction]
fn constants<'py>(py: Python<'py>, config: &PyConfig) -> PyResult<Bound<'py, PyAny>> {
    let cfg = &config.cfg;
    let data = shockmfg::cli::bounds_data(cfg).map_err(err)?;
    let report = bounds::compute_constants(&data, cfg.grid.horizon, cfg.shock_cap().map_err(err)?);
    json_to_py(py, &report)
}

/// Truncation error bound for a shock cap `n`.
#[pyfunction]
fn epsilon(config: &PyConfig, n: usize) -> PyResult<f64> {
    let data = shockmfg::cli::bounds_data(&config.cfg).map_err(err)?;
    Ok(bounds::epsilon(&data, config.cfg.grid.horizon, n))
}

#[pymodule]
#[pyo3(name = "shockmfg")]
fn shockmfg_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PySolution>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(constants, m)?)?;
    m.add_function(wrap_pyfunction!(epsilon, m)?)?;
    Ok(())
}
