//! Game definitions and the pointwise Hamiltonian maximiser.

mod corruption;
mod table;

pub use corruption::{CorruptionModel, CorruptionParams};
pub use table::{TableModel, TableParams};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
    #[error("non-finite objective in state {state} at action {action}")]
    NonFiniteObjective { state: usize, action: f64 },
}

/// Closed scalar action interval with a search grid for the generic
/// maximiser.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionBox {
    pub lo: f64,
    pub hi: f64,
    pub grid_points: usize,
}

impl ActionBox {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self {
            lo,
            hi,
            grid_points: 401,
        }
    }

    pub fn clamp(&self, a: f64) -> f64 {
        a.clamp(self.lo, self.hi)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi) {
            return Err(ModelError::InvalidParams(format!(
                "action box [{}, {}] is not a finite interval",
                self.lo, self.hi
            )));
        }
        if self.grid_points < 2 && self.lo < self.hi {
            return Err(ModelError::InvalidParams(
                "action grid needs at least 2 points".into(),
            ));
        }
        Ok(())
    }
}

/// Suprema of the model coefficients over the action box and the simplex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extrema {
    /// Largest absolute row sum of the generator.
    pub q_max: f64,
    pub psi_max: f64,
    pub terminal_max: f64,
    pub lambda_max: f64,
    /// Largest number of states relocated onto a single state.
    pub j_max: f64,
}

/// A finite-state game with at most `shock_cap` common shocks.
///
/// Generator rows are indexed by the current state `i`; `k` is the number
/// of shocks seen so far and `m` the aggregate distribution.
pub trait GameModel: Send + Sync {
    fn state_count(&self) -> usize;
    fn shock_cap(&self) -> usize;
    fn initial_distribution(&self) -> &[f64];
    fn action_box(&self) -> ActionBox;

    fn state_names(&self) -> Vec<String> {
        (0..self.state_count()).map(|i| i.to_string()).collect()
    }

    /// Writes row `i` of `Q(t, k, m, a)` into `row`.
    fn generator_row(&self, t: f64, k: usize, m: &[f64], i: usize, a: f64, row: &mut [f64]);

    fn running_reward(&self, t: f64, k: usize, m: &[f64], i: usize, a: f64) -> f64;

    fn terminal_reward(&self, k: usize, m: &[f64], out: &mut [f64]);

    /// Intensity of shock number `k` (1-based) at time `t`.
    fn shock_intensity(&self, k: usize, t: f64, m: &[f64]) -> f64;

    /// State an agent in `i` is moved to when a shock hits at `t`.
    fn relocate_state(&self, t: f64, i: usize) -> usize;

    /// Analytic argmax of the Hamiltonian, if the model has one.
    fn closed_form_action(&self, _t: f64, _k: usize, _m: &[f64], _v: &[f64], _i: usize) -> Option<f64> {
        None
    }

    fn extrema(&self) -> Extrema;

    /// Maximises `psi^i(a) + sum_j Q^{ij}(a) v^j` over the action box.
    ///
    /// Returns `(a*, psi^i(a*))` and leaves `Q^{i.}(a*)` in `row`.
    fn hamiltonian_max(
        &self,
        t: f64,
        k: usize,
        m: &[f64],
        v: &[f64],
        i: usize,
        row: &mut [f64],
    ) -> Result<(f64, f64), ModelError> {
        let a = match self.closed_form_action(t, k, m, v, i) {
            Some(a) => a,
            None => grid_argmax(self, t, k, m, v, i, row)?,
        };
        self.generator_row(t, k, m, i, a, row);
        let psi = self.running_reward(t, k, m, i, a);
        if !psi.is_finite() || row.iter().any(|q| !q.is_finite()) {
            return Err(ModelError::NonFiniteObjective { state: i, action: a });
        }
        Ok((a, psi))
    }
}

/// Grid search over the action box; ties go to the smallest action.
pub fn grid_argmax<M: GameModel + ?Sized>(
    model: &M,
    t: f64,
    k: usize,
    m: &[f64],
    v: &[f64],
    i: usize,
    row: &mut [f64],
) -> Result<f64, ModelError> {
    let bx = model.action_box();
    let n = if bx.hi > bx.lo { bx.grid_points } else { 1 };
    let mut best_a = bx.lo;
    let mut best = f64::NEG_INFINITY;
    for g in 0..n {
        let a = if n == 1 {
            bx.lo
        } else if g + 1 == n {
            bx.hi
        } else {
            bx.lo + (bx.hi - bx.lo) * g as f64 / (n - 1) as f64
        };
        let obj = objective(model, t, k, m, v, i, a, row);
        if !obj.is_finite() {
            return Err(ModelError::NonFiniteObjective { state: i, action: a });
        }
        if obj > best {
            best = obj;
            best_a = a;
        }
    }
    Ok(best_a)
}

/// `psi^i(a) + sum_j Q^{ij}(a) v^j`.
#[allow(clippy::too_many_arguments)]
pub fn objective<M: GameModel + ?Sized>(
    model: &M,
    t: f64,
    k: usize,
    m: &[f64],
    v: &[f64],
    i: usize,
    a: f64,
    row: &mut [f64],
) -> f64 {
    model.generator_row(t, k, m, i, a, row);
    let mut h = model.running_reward(t, k, m, i, a);
    for (q, vj) in row.iter().zip(v) {
        h += q * vj;
    }
    h
}

/// Pushes a distribution through the relocation map:
/// `out_j = sum_i m_i 1{J(i) = j}`.
pub fn relocate(m: &[f64], jmap: &[usize], out: &mut [f64]) {
    out.iter_mut().for_each(|x| *x = 0.0);
    for (i, &j) in jmap.iter().enumerate() {
        out[j] += m[i];
    }
}

/// Largest preimage size of a relocation map.
pub fn max_preimage(jmap: &[usize], states: usize) -> usize {
    let mut counts = vec![0usize; states];
    for &j in jmap {
        counts[j] += 1;
    }
    counts.into_iter().max().unwrap_or(0)
}

pub(crate) fn check_simplex(m: &[f64], what: &str) -> Result<(), ModelError> {
    let sum: f64 = m.iter().sum();
    if m.iter().any(|x| !x.is_finite() || *x < -1e-9) || (sum - 1.0).abs() > 1e-9 {
        return Err(ModelError::InvalidParams(format!(
            "{what} must lie in the probability simplex, got {m:?}"
        )));
    }
    Ok(())
}

/// Built-in models behind one statically dispatched type.
#[derive(Debug, Clone)]
pub enum Model {
    Corruption(CorruptionModel),
    Table(TableModel),
}

macro_rules! dispatch {
    ($self:ident, $m:ident => $e:expr) => {
        match $self {
            Model::Corruption($m) => $e,
            Model::Table($m) => $e,
        }
    };
}

impl GameModel for Model {
    fn state_count(&self) -> usize {
        dispatch!(self, x => x.state_count())
    }
    fn shock_cap(&self) -> usize {
        dispatch!(self, x => x.shock_cap())
    }
    fn initial_distribution(&self) -> &[f64] {
        dispatch!(self, x => x.initial_distribution())
    }
    fn action_box(&self) -> ActionBox {
        dispatch!(self, x => x.action_box())
    }
    fn state_names(&self) -> Vec<String> {
        dispatch!(self, x => x.state_names())
    }
    #[inline]
    fn generator_row(&self, t: f64, k: usize, m: &[f64], i: usize, a: f64, row: &mut [f64]) {
        dispatch!(self, x => x.generator_row(t, k, m, i, a, row))
    }
    #[inline]
    fn running_reward(&self, t: f64, k: usize, m: &[f64], i: usize, a: f64) -> f64 {
        dispatch!(self, x => x.running_reward(t, k, m, i, a))
    }
    fn terminal_reward(&self, k: usize, m: &[f64], out: &mut [f64]) {
        dispatch!(self, x => x.terminal_reward(k, m, out))
    }
    #[inline]
    fn shock_intensity(&self, k: usize, t: f64, m: &[f64]) -> f64 {
        dispatch!(self, x => x.shock_intensity(k, t, m))
    }
    #[inline]
    fn relocate_state(&self, t: f64, i: usize) -> usize {
        dispatch!(self, x => x.relocate_state(t, i))
    }
    #[inline]
    fn closed_form_action(&self, t: f64, k: usize, m: &[f64], v: &[f64], i: usize) -> Option<f64> {
        dispatch!(self, x => x.closed_form_action(t, k, m, v, i))
    }
    fn extrema(&self) -> Extrema {
        dispatch!(self, x => x.extrema())
    }
    #[inline]
    fn hamiltonian_max(
        &self,
        t: f64,
        k: usize,
        m: &[f64],
        v: &[f64],
        i: usize,
        row: &mut [f64],
    ) -> Result<(f64, f64), ModelError> {
        dispatch!(self, x => x.hamiltonian_max(t, k, m, v, i, row))
    }
}

impl From<CorruptionModel> for Model {
    fn from(m: CorruptionModel) -> Self {
        Model::Corruption(m)
    }
}

impl From<TableModel> for Model {
    fn from(m: TableModel) -> Self {
        Model::Table(m)
    }
}
