//! Value functions on the lattice by backward integration, group by group
//! from the largest shock count down to the root.

use rayon::prelude::*;

use crate::bounds::{self, BoundsData, Lipschitz};
use crate::error::SolveError;
use crate::field::{midpoint, Field, LevelView};
use crate::lattice::{Lattice, LatticeNode};
use crate::model::GameModel;

/// Solves the value equations given the aggregate distribution `mu`.
///
/// Returns an error if any value exceeds ten times the a priori bound.
pub fn solve_backward<M: GameModel + ?Sized>(model: &M, mu: &Field) -> Result<Field, SolveError> {
    check_shape(model, mu)?;
    let mut v = Field::zeros(mu.lattice().clone(), model.state_count());
    sweep(model, mu, &mut v, false)?;
    Ok(v)
}

/// One-step defects of a given value field: the largest mismatch between a
/// stored value and one integration step from its stored successor, and the
/// largest terminal mismatch.
pub fn backward_defect<M: GameModel + ?Sized>(
    model: &M,
    mu: &Field,
    v: &Field,
) -> Result<(f64, f64), SolveError> {
    check_shape(model, mu)?;
    check_shape(model, v)?;
    let mut work = v.clone();
    sweep(model, mu, &mut work, true)
}

fn sweep<M: GameModel + ?Sized>(
    model: &M,
    mu: &Field,
    v: &mut Field,
    defect: bool,
) -> Result<(f64, f64), SolveError> {
    let lattice = mu.lattice().clone();
    let s = model.state_count();
    let grid = *lattice.grid();
    let b = BoundsData::new(model.extrema(), Lipschitz::default());
    let bound = 10.0 * bounds::v_max(&b, grid.horizon(), lattice.cap());
    let cap = lattice.cap();
    let mut worst = (0.0f64, 0.0f64);
    let mut solved = vec![false; cap + 2];
    solved[cap + 1] = true;
    for k in (0..=cap).rev() {
        if !solved[k + 1] {
            return Err(SolveError::MissingLevel(k + 1));
        }
        let above_base = lattice.level_point_offset(k + 1);
        let (_, chunks, above) = v.split_level_mut(k);
        let above = LevelView {
            states: s,
            base_point: above_base,
            data: above,
        };
        let ctx = Ctx {
            model,
            lattice: &lattice,
            mu,
            above,
            k,
            bound,
            defect,
        };
        let d = chunks
            .into_par_iter()
            .zip(lattice.level(k).into_par_iter())
            .map(|(out, id)| ctx.solve_node(id, out))
            .try_reduce(|| (0.0, 0.0), |a, b| Ok((a.0.max(b.0), a.1.max(b.1))))?;
        worst = (worst.0.max(d.0), worst.1.max(d.1));
        solved[k] = true;
    }
    Ok(worst)
}

pub(crate) fn check_shape<M: GameModel + ?Sized>(model: &M, f: &Field) -> Result<(), SolveError> {
    if f.states() != model.state_count() {
        return Err(SolveError::Mismatch(format!(
            "field has {} states, model has {}",
            f.states(),
            model.state_count()
        )));
    }
    if f.lattice().cap() != model.shock_cap() {
        return Err(SolveError::Mismatch(format!(
            "lattice holds {} shocks, model allows {}",
            f.lattice().cap(),
            model.shock_cap()
        )));
    }
    Ok(())
}

struct Ctx<'a, M: ?Sized> {
    model: &'a M,
    lattice: &'a Lattice,
    mu: &'a Field,
    above: LevelView<'a>,
    k: usize,
    bound: f64,
    defect: bool,
}

impl<M: GameModel + ?Sized> Ctx<'_, M> {
    /// Integrates one node in place, or in defect mode measures the stored
    /// values against single steps. Returns `(step, terminal)` defects.
    fn solve_node(&self, id: usize, out: &mut [f64]) -> Result<(f64, f64), SolveError> {
        let model = self.model;
        let grid = self.lattice.grid();
        let node = self.lattice.node(id);
        let s = model.state_count();
        let (p, n) = (node.start, grid.steps());
        let dt = grid.dt();
        let at = |m: usize| (m - p) * s;

        let mut scratch = Scratch::new(s);
        model.terminal_reward(self.k, self.mu.at(id, n), &mut scratch.y);
        let term = &mut out[at(n)..at(n) + s];
        let mut d_term = 0.0f64;
        if self.defect {
            d_term = max_diff(term, &scratch.y);
        } else {
            term.copy_from_slice(&scratch.y);
        }
        self.check(id, n, term)?;
        if p == n {
            return Ok((0.0, d_term));
        }
        let mut d_step = 0.0f64;

        let coupled = self.k < self.lattice.cap();
        let g = if coupled {
            self.coupling(node, id)
        } else {
            Vec::new()
        };

        let mut y_new = vec![0.0; s];
        let mut mu_mid = vec![0.0; s];
        let mut g_mid = if coupled { vec![0.0; s] } else { Vec::new() };
        let mu_node = self.mu.node_values(id);
        for m in (p..n).rev() {
            let (t0, t1) = (grid.node(m), grid.node(m + 1));
            let tm = 0.5 * (t0 + t1);
            for i in 0..s {
                mu_mid[i] = midpoint(|j| mu_node[(j - p) * s + i], m, p, n);
                if coupled {
                    g_mid[i] = midpoint(|j| g[(j - p) * s + i], m, p, n);
                }
            }
            let mu0 = &mu_node[at(m)..at(m) + s];
            let mu1 = &mu_node[at(m + 1)..at(m + 1) + s];
            let (g0, g1) = if coupled {
                (&g[at(m)..at(m) + s], &g[at(m + 1)..at(m + 1) + s])
            } else {
                (&[][..], &[][..])
            };
            let (left, right) = out.split_at_mut(at(m + 1));
            let y1 = &right[..s];
            let y0 = &mut left[at(m)..at(m) + s];

            let sc = &mut scratch;
            self.rhs(t1, mu1, y1, g1, &mut sc.k1, &mut sc.row)?;
            axpy(y1, -0.5 * dt, &sc.k1, &mut sc.y);
            self.rhs(tm, &mu_mid, &sc.y, &g_mid, &mut sc.k2, &mut sc.row)?;
            axpy(y1, -0.5 * dt, &sc.k2, &mut sc.y);
            self.rhs(tm, &mu_mid, &sc.y, &g_mid, &mut sc.k3, &mut sc.row)?;
            axpy(y1, -dt, &sc.k3, &mut sc.y);
            self.rhs(t0, mu0, &sc.y, g0, &mut sc.k4, &mut sc.row)?;
            for i in 0..s {
                y_new[i] = y1[i]
                    - dt / 6.0 * (sc.k1[i] + 2.0 * sc.k2[i] + 2.0 * sc.k3[i] + sc.k4[i]);
            }
            if self.defect {
                d_step = d_step.max(max_diff(y0, &y_new));
            } else {
                y0.copy_from_slice(&y_new);
            }
            self.check(id, m, y0)?;
        }
        Ok((d_step, d_term))
    }

    /// `g_m^i = v^{J(i)}(t_m, u + shock at m)` for `m` in `p..=N`. The entry
    /// at `p` has no lattice child and is extrapolated.
    fn coupling(&self, node: &LatticeNode, id: usize) -> Vec<f64> {
        let grid = self.lattice.grid();
        let s = self.model.state_count();
        let (p, n) = (node.start, grid.steps());
        let mut g = vec![0.0; (n + 1 - p) * s];
        for m in p + 1..=n {
            let child = self
                .lattice
                .child(id, m)
                .expect("every later grid index has a child");
            let vc = self.above.at(self.lattice.node(child), m);
            let t = grid.node(m);
            for i in 0..s {
                g[(m - p) * s + i] = vc[self.model.relocate_state(t, i)];
            }
        }
        let avail = n - p;
        for i in 0..s {
            let x = |j: usize| g[j * s + i];
            g[i] = match avail {
                1 => x(1),
                2 => 2.0 * x(1) - x(2),
                _ => 3.0 * x(1) - 3.0 * x(2) + x(3),
            };
        }
        g
    }

    /// Time derivative of `v` (forward in time).
    fn rhs(
        &self,
        t: f64,
        m: &[f64],
        v: &[f64],
        g: &[f64],
        out: &mut [f64],
        row: &mut [f64],
    ) -> Result<(), SolveError> {
        let model = self.model;
        let lam = if g.is_empty() {
            0.0
        } else {
            model.shock_intensity(self.k + 1, t, m)
        };
        for i in 0..v.len() {
            let (_, psi) = model.hamiltonian_max(t, self.k, m, v, i, row)?;
            let mut h = psi;
            for (q, vj) in row.iter().zip(v) {
                h += q * vj;
            }
            if lam != 0.0 {
                h += lam * (g[i] - v[i]);
            }
            out[i] = -h;
        }
        Ok(())
    }

    fn check(&self, id: usize, m: usize, y: &[f64]) -> Result<(), SolveError> {
        for &x in y {
            if !x.is_finite() || x.abs() > self.bound {
                return Err(SolveError::BlowUp {
                    node: id,
                    time: m,
                    value: x,
                    bound: self.bound,
                });
            }
        }
        Ok(())
    }
}

pub(crate) struct Scratch {
    pub k1: Vec<f64>,
    pub k2: Vec<f64>,
    pub k3: Vec<f64>,
    pub k4: Vec<f64>,
    pub y: Vec<f64>,
    pub row: Vec<f64>,
}

impl Scratch {
    pub fn new(s: usize) -> Self {
        Self {
            k1: vec![0.0; s],
            k2: vec![0.0; s],
            k3: vec![0.0; s],
            k4: vec![0.0; s],
            y: vec![0.0; s],
            row: vec![0.0; s],
        }
    }
}

pub(crate) fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()))
}

#[inline]
pub(crate) fn axpy(y: &[f64], h: f64, k: &[f64], out: &mut [f64]) {
    for i in 0..y.len() {
        out[i] = y[i] + h * k[i];
    }
}
