//! Models given by coefficient tables.
//!
//! Off-diagonal rates are affine in the aggregate distribution and the
//! action, `Q^{ij} = base^{ij} + sum_l coupling^{ijl} m^l + control^{ij} a`,
//! and rewards are `psi^i = reward^i + sum_l reward_coupling^{il} m^l - cost^i a^2`.

use serde::{Deserialize, Serialize};

use super::{check_simplex, max_preimage, ActionBox, Extrema, GameModel, ModelError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableParams {
    pub states: usize,
    #[serde(default)]
    pub shocks: usize,
    pub m0: Vec<f64>,
    /// `S x S` base rates; the diagonal is ignored.
    #[serde(default)]
    pub base: Vec<Vec<f64>>,
    /// `S x S x S` mean-field slopes of the rates; empty means none.
    #[serde(default)]
    pub coupling: Vec<Vec<Vec<f64>>>,
    /// `S x S` action slopes of the rates; empty means none.
    #[serde(default)]
    pub control: Vec<Vec<f64>>,
    #[serde(default)]
    pub reward: Vec<f64>,
    #[serde(default)]
    pub reward_coupling: Vec<Vec<f64>>,
    #[serde(default)]
    pub cost: Vec<f64>,
    #[serde(default)]
    pub terminal: Vec<f64>,
    /// Intensity per shock number; a single entry is used for all shocks.
    #[serde(default)]
    pub lambda: Vec<f64>,
    /// Post-shock state of each state; empty means identity.
    #[serde(default)]
    pub relocation: Vec<usize>,
    #[serde(default)]
    pub action_lo: f64,
    #[serde(default)]
    pub action_hi: f64,
    #[serde(default = "default_grid")]
    pub action_grid: usize,
    /// Use the analytic maximiser instead of grid search.
    #[serde(default = "default_true")]
    pub closed_form: bool,
    #[serde(default)]
    pub names: Vec<String>,
}

fn default_grid() -> usize {
    401
}

fn default_true() -> bool {
    true
}

impl TableParams {
    /// A model with `states` states, no dynamics and zero rewards.
    pub fn blank(states: usize, m0: Vec<f64>) -> Self {
        Self {
            states,
            shocks: 0,
            m0,
            base: vec![],
            coupling: vec![],
            control: vec![],
            reward: vec![],
            reward_coupling: vec![],
            cost: vec![],
            terminal: vec![],
            lambda: vec![],
            relocation: vec![],
            action_lo: 0.0,
            action_hi: 0.0,
            action_grid: 401,
            closed_form: true,
            names: vec![],
        }
    }
}

#[derive(Debug, Clone)]
pub struct TableModel {
    s: usize,
    shocks: usize,
    m0: Vec<f64>,
    base: Vec<f64>,
    coupling: Vec<f64>,
    control: Vec<f64>,
    reward: Vec<f64>,
    reward_coupling: Vec<f64>,
    cost: Vec<f64>,
    terminal: Vec<f64>,
    lambda: Vec<f64>,
    relocation: Vec<usize>,
    bx: ActionBox,
    closed_form: bool,
    names: Vec<String>,
    params: TableParams,
}

fn flat2(name: &str, v: &[Vec<f64>], s: usize) -> Result<Vec<f64>, ModelError> {
    if v.is_empty() {
        return Ok(vec![0.0; s * s]);
    }
    if v.len() != s || v.iter().any(|r| r.len() != s) {
        return Err(ModelError::InvalidParams(format!("{name} must be {s} x {s}")));
    }
    Ok(v.iter().flatten().copied().collect())
}

fn flat1(name: &str, v: &[f64], s: usize) -> Result<Vec<f64>, ModelError> {
    if v.is_empty() {
        return Ok(vec![0.0; s]);
    }
    if v.len() != s {
        return Err(ModelError::InvalidParams(format!("{name} must have {s} entries")));
    }
    Ok(v.to_vec())
}

impl TableModel {
    /// The parameters the model was built from.
    pub fn params(&self) -> &TableParams {
        &self.params
    }

    pub fn new(p: TableParams) -> Result<Self, ModelError> {
        let s = p.states;
        let bad = |msg: String| Err(ModelError::InvalidParams(msg));
        if s == 0 {
            return bad("states must be positive".into());
        }
        if p.m0.len() != s {
            return bad(format!("m0 must have {s} entries"));
        }
        check_simplex(&p.m0, "m0")?;
        let base = flat2("base", &p.base, s)?;
        let control = flat2("control", &p.control, s)?;
        let reward_coupling = flat2("reward_coupling", &p.reward_coupling, s)?;
        let coupling = if p.coupling.is_empty() {
            vec![0.0; s * s * s]
        } else {
            if p.coupling.len() != s
                || p.coupling.iter().any(|r| r.len() != s || r.iter().any(|c| c.len() != s))
            {
                return bad(format!("coupling must be {s} x {s} x {s}"));
            }
            p.coupling.iter().flatten().flatten().copied().collect()
        };
        let reward = flat1("reward", &p.reward, s)?;
        let cost = flat1("cost", &p.cost, s)?;
        let terminal = flat1("terminal", &p.terminal, s)?;
        let lambda = match p.lambda.len() {
            0 if p.shocks == 0 => vec![],
            1 => vec![p.lambda[0]; p.shocks],
            n if n == p.shocks => p.lambda.clone(),
            _ => return bad(format!("lambda must have 1 or {} entries", p.shocks)),
        };
        if lambda.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return bad("lambda must be finite and >= 0".into());
        }
        let relocation = if p.relocation.is_empty() {
            (0..s).collect()
        } else {
            p.relocation.clone()
        };
        if relocation.len() != s || relocation.iter().any(|&j| j >= s) {
            return bad(format!("relocation must map {s} states into 0..{s}"));
        }
        if cost.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return bad("cost must be finite and >= 0".into());
        }
        let bx = ActionBox {
            lo: p.action_lo,
            hi: p.action_hi,
            grid_points: p.action_grid,
        };
        bx.validate()?;
        let all = base
            .iter()
            .chain(&coupling)
            .chain(&control)
            .chain(&reward)
            .chain(&reward_coupling)
            .chain(&terminal);
        if all.into_iter().any(|x| !x.is_finite()) {
            return bad("all coefficients must be finite".into());
        }
        let names = if p.names.is_empty() {
            (0..s).map(|i| i.to_string()).collect()
        } else if p.names.len() == s {
            p.names.clone()
        } else {
            return bad(format!("names must have {s} entries"));
        };
        let model = Self {
            s,
            shocks: p.shocks,
            m0: p.m0.clone(),
            base,
            coupling,
            control,
            reward,
            reward_coupling,
            cost,
            terminal,
            lambda,
            relocation,
            bx,
            closed_form: p.closed_form,
            names,
            params: p,
        };
        for i in 0..s {
            for j in 0..s {
                if i != j && model.rate_bounds(i, j).0 < 0.0 {
                    return bad(format!("rate {i}->{j} can become negative"));
                }
            }
        }
        Ok(model)
    }

    /// Range of the off-diagonal rate `i -> j` over the simplex and the box.
    fn rate_bounds(&self, i: usize, j: usize) -> (f64, f64) {
        let s = self.s;
        let c = &self.coupling[(i * s + j) * s..(i * s + j + 1) * s];
        let cmin = c.iter().cloned().fold(f64::INFINITY, f64::min);
        let cmax = c.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let u = self.control[i * s + j];
        let (alo, ahi) = (u * self.bx.lo, u * self.bx.hi);
        let b = self.base[i * s + j];
        (b + cmin + alo.min(ahi), b + cmax + alo.max(ahi))
    }

    fn reward_bounds(&self, i: usize) -> (f64, f64) {
        let s = self.s;
        let rc = &self.reward_coupling[i * s..(i + 1) * s];
        let rmin = rc.iter().cloned().fold(f64::INFINITY, f64::min);
        let rmax = rc.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = (self.bx.lo, self.bx.hi);
        let sq_max = (lo * lo).max(hi * hi);
        let sq_min = if lo <= 0.0 && hi >= 0.0 { 0.0 } else { (lo * lo).min(hi * hi) };
        let c = self.cost[i];
        (
            self.reward[i] + rmin - c * sq_max,
            self.reward[i] + rmax - c * sq_min,
        )
    }
}

impl GameModel for TableModel {
    fn state_count(&self) -> usize {
        self.s
    }

    fn shock_cap(&self) -> usize {
        self.shocks
    }

    fn initial_distribution(&self) -> &[f64] {
        &self.m0
    }

    fn action_box(&self) -> ActionBox {
        self.bx
    }

    fn state_names(&self) -> Vec<String> {
        self.names.clone()
    }

    fn generator_row(&self, _t: f64, _k: usize, m: &[f64], i: usize, a: f64, row: &mut [f64]) {
        let s = self.s;
        let mut diag = 0.0;
        for j in 0..s {
            if j == i {
                continue;
            }
            let c = &self.coupling[(i * s + j) * s..(i * s + j + 1) * s];
            let mut q = self.base[i * s + j] + self.control[i * s + j] * a;
            for (cl, ml) in c.iter().zip(m) {
                q += cl * ml;
            }
            row[j] = q;
            diag += q;
        }
        row[i] = -diag;
    }

    fn running_reward(&self, _t: f64, _k: usize, m: &[f64], i: usize, a: f64) -> f64 {
        let s = self.s;
        let mut r = self.reward[i] - self.cost[i] * a * a;
        for (c, ml) in self.reward_coupling[i * s..(i + 1) * s].iter().zip(m) {
            r += c * ml;
        }
        r
    }

    fn terminal_reward(&self, _k: usize, _m: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.terminal);
    }

    fn shock_intensity(&self, k: usize, _t: f64, _m: &[f64]) -> f64 {
        self.lambda.get(k.wrapping_sub(1)).copied().unwrap_or(0.0)
    }

    fn relocate_state(&self, _t: f64, i: usize) -> usize {
        self.relocation[i]
    }

    fn closed_form_action(&self, _t: f64, _k: usize, _m: &[f64], v: &[f64], i: usize) -> Option<f64> {
        if !self.closed_form {
            return None;
        }
        let s = self.s;
        let mut slope = 0.0;
        for j in 0..s {
            if j != i {
                slope += self.control[i * s + j] * (v[j] - v[i]);
            }
        }
        let c = self.cost[i];
        Some(if c > 0.0 {
            self.bx.clamp(slope / (2.0 * c))
        } else if slope > 0.0 {
            self.bx.hi
        } else {
            self.bx.lo
        })
    }

    fn extrema(&self) -> Extrema {
        let s = self.s;
        let mut q_max = 0.0f64;
        let mut psi_max = 0.0f64;
        for i in 0..s {
            let out: f64 = (0..s)
                .filter(|&j| j != i)
                .map(|j| self.rate_bounds(i, j).1)
                .sum();
            q_max = q_max.max(2.0 * out);
            let (lo, hi) = self.reward_bounds(i);
            psi_max = psi_max.max(lo.abs()).max(hi.abs());
        }
        Extrema {
            q_max,
            psi_max,
            terminal_max: self.terminal.iter().fold(0.0f64, |a, x| a.max(x.abs())),
            lambda_max: self.lambda.iter().fold(0.0f64, |a, x| a.max(*x)),
            j_max: max_preimage(&self.relocation, s) as f64,
        }
    }
}
