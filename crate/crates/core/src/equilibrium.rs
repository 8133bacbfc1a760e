//! Fixed-point iteration of the forward-backward map and post-processing of
//! its result.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::backward::{backward_defect, solve_backward};
use crate::error::{Error, Result, SolveError};
use crate::field::Field;
use crate::forward::{forward_defect, solve_forward_with, ForwardOptions, ForwardStats};
use crate::lattice::{Lattice, TimeGrid};
use crate::model::GameModel;

/// Residual ratios are only trusted while residuals sit above roundoff.
const RATIO_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, Default)]
pub enum InitialGuess {
    /// The initial distribution at every lattice point.
    #[default]
    ConstantM0,
    Field(Field),
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Sup-norm tolerance on successive distribution fields.
    pub tol: f64,
    pub max_iters: usize,
    /// Weight of the new iterate, in `(0, 1]`; 1 is plain Picard.
    pub damping: f64,
    pub initial: InitialGuess,
    pub forward: ForwardOptions,
    /// Upper bound on lattice points; see [`Lattice::with_budget`].
    pub point_budget: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iters: 200,
            damping: 1.0,
            initial: InitialGuess::ConstantM0,
            forward: ForwardOptions::default(),
            point_budget: crate::lattice::DEFAULT_POINT_BUDGET,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Config(format!(
                "damping must lie in (0, 1], got {}",
                self.damping
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EquilibriumSolution {
    pub mu: Field,
    pub v: Field,
    /// `sup |F(mu_j) - mu_j|` for every iteration.
    pub residual_history: Vec<f64>,
    pub iterations: usize,
    /// Geometric mean of successive residual ratios, if at least two
    /// residuals were above roundoff.
    pub contraction_estimate: Option<f64>,
    pub converged: bool,
    pub damping: f64,
    pub tol: f64,
    pub forward_stats: ForwardStats,
}

impl EquilibriumSolution {
    pub fn lattice(&self) -> &Arc<Lattice> {
        self.mu.lattice()
    }

    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(f64::INFINITY)
    }

    /// Turns a non-converged run into an error.
    pub fn ensure_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged {
                iterations: self.iterations,
                residual: self.final_residual(),
            })
        }
    }

    /// `sum_i m0^i v^i(0, root)`.
    pub fn initial_value(&self, m0: &[f64]) -> f64 {
        let root = self.lattice().root();
        m0.iter().zip(self.v.at(root, 0)).map(|(a, b)| a * b).sum()
    }
}

/// Geometric mean of `r_{j+1} / r_j` over residuals above roundoff.
pub fn contraction_estimate(history: &[f64]) -> Option<f64> {
    let usable: Vec<f64> = history
        .iter()
        .copied()
        .take_while(|r| *r > RATIO_FLOOR)
        .collect();
    if usable.len() < 2 {
        return None;
    }
    let logs: f64 = usable.windows(2).map(|w| (w[1] / w[0]).ln()).sum();
    Some((logs / (usable.len() - 1) as f64).exp())
}

pub fn solve_equilibrium<M: GameModel + ?Sized>(
    model: &M,
    grid: TimeGrid,
    opts: &SolverOptions,
) -> Result<EquilibriumSolution> {
    opts.validate()?;
    let lattice = Arc::new(Lattice::with_budget(grid, model.shock_cap(), opts.point_budget)?);
    let mut mu = match &opts.initial {
        InitialGuess::ConstantM0 => Field::constant(lattice.clone(), model.initial_distribution()),
        InitialGuess::Field(f) => {
            if f.lattice().grid() != lattice.grid()
                || f.lattice().cap() != lattice.cap()
                || f.states() != model.state_count()
            {
                return Err(SolveError::Mismatch("initial guess lives on another lattice".into()).into());
            }
            Field::from_values(lattice.clone(), f.states(), f.values().to_vec())
                .expect("same layout")
        }
    };

    let theta = opts.damping;
    let mut history = Vec::new();
    let mut best: Option<(f64, Field, Field, ForwardStats)> = None;
    for _ in 0..opts.max_iters {
        let v = solve_backward(model, &mu)?;
        let (next, stats) = solve_forward_with(model, &v, opts.forward)?;
        let r = next.sup_distance(&mu);
        history.push(r);
        if r <= opts.tol {
            return Ok(EquilibriumSolution {
                mu: next,
                v,
                iterations: history.len(),
                contraction_estimate: contraction_estimate(&history),
                residual_history: history,
                converged: true,
                damping: theta,
                tol: opts.tol,
                forward_stats: stats,
            });
        }
        if theta < 1.0 {
            mu.values_mut()
                .par_iter_mut()
                .zip(next.values().par_iter())
                .for_each(|(a, b)| *a = (1.0 - theta) * *a + theta * b);
            if best.as_ref().is_none_or(|b| r < b.0) {
                best = Some((r, next, v, stats));
            }
        } else {
            if best.as_ref().is_none_or(|b| r < b.0) {
                best = Some((r, next.clone(), v, stats));
            }
            mu = next;
        }
    }
    let (_, mu, v, stats) = best.expect("at least one iteration ran");
    Ok(EquilibriumSolution {
        mu,
        v,
        iterations: history.len(),
        contraction_estimate: contraction_estimate(&history),
        residual_history: history,
        converged: false,
        damping: theta,
        tol: opts.tol,
        forward_stats: stats,
    })
}

/// Largest one-step mismatches of `(mu, v)` in the discretised equilibrium
/// system, split by equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SystemResiduals {
    /// Value equation, one backward step.
    pub value_step: f64,
    /// Distribution equation, one forward step.
    pub distribution_step: f64,
    /// Terminal condition on the value.
    pub terminal: f64,
    /// Initial condition on the distribution.
    pub initial: f64,
    /// Relocation at shock times.
    pub relocation: f64,
}

impl SystemResiduals {
    pub fn max(&self) -> f64 {
        [
            self.value_step,
            self.distribution_step,
            self.terminal,
            self.initial,
            self.relocation,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

pub fn system_residuals<M: GameModel + ?Sized>(
    model: &M,
    mu: &Field,
    v: &Field,
) -> Result<SystemResiduals> {
    let (value_step, terminal) = backward_defect(model, mu, v)?;
    let f = forward_defect(model, v, mu, ForwardOptions::default())?;
    Ok(SystemResiduals {
        value_step,
        distribution_step: f.step,
        terminal,
        initial: f.initial,
        relocation: f.relocation,
    })
}

/// Optimal feedback action at every lattice point, as a field with one
/// entry per state.
pub fn extract_policy<M: GameModel + ?Sized>(
    sol: &EquilibriumSolution,
    model: &M,
) -> Result<Field> {
    let lattice = sol.lattice().clone();
    let s = model.state_count();
    let grid = *lattice.grid();
    let mut out = Field::zeros(lattice.clone(), s);
    let mut row = vec![0.0; s];
    for (id, node) in lattice.nodes().iter().enumerate() {
        for m in node.start..=grid.steps() {
            let t = grid.node(m);
            let mu = sol.mu.at(id, m);
            let v = sol.v.at(id, m);
            for i in 0..s {
                let (a, _) = model
                    .hamiltonian_max(t, node.level, mu, v, i, &mut row)
                    .map_err(SolveError::from)?;
                out.at_mut(id, m)[i] = a;
            }
        }
    }
    Ok(out)
}
