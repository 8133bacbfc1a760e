//! Aggregate distributions on the lattice by forward integration of the
//! controlled Kolmogorov equation, group by group from the root upwards.

use rayon::prelude::*;

use crate::backward::{axpy, check_shape, max_diff, Scratch};
use crate::error::SolveError;
use crate::field::{midpoint, Field, LevelView};
use crate::lattice::Lattice;
use crate::model::{relocate, GameModel};

/// Components below this are an error rather than roundoff.
pub const NEGATIVE_MASS_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ForwardOptions {
    /// Freeze each step's actions at its left endpoint instead of
    /// re-maximising at every stage.
    pub frozen_policy: bool,
}

/// Roundoff repairs made during a forward solve.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ForwardStats {
    /// Number of stored vectors that needed clipping.
    pub clipped: usize,
    /// Largest total mass moved by a single clip.
    pub max_clip: f64,
}

/// Solves the distribution equations given the value field `v`.
pub fn solve_forward<M: GameModel + ?Sized>(model: &M, v: &Field) -> Result<Field, SolveError> {
    solve_forward_with(model, v, ForwardOptions::default()).map(|(mu, _)| mu)
}

pub fn solve_forward_with<M: GameModel + ?Sized>(
    model: &M,
    v: &Field,
    opts: ForwardOptions,
) -> Result<(Field, ForwardStats), SolveError> {
    check_shape(model, v)?;
    let mut mu = Field::zeros(v.lattice().clone(), model.state_count());
    let (stats, _) = sweep(model, v, &mut mu, opts, false)?;
    Ok((mu, stats))
}

/// Largest mismatches of a stored distribution field against the
/// initial condition, one integration step, and the post-shock relocation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ForwardDefect {
    pub initial: f64,
    pub step: f64,
    pub relocation: f64,
}

pub fn forward_defect<M: GameModel + ?Sized>(
    model: &M,
    v: &Field,
    mu: &Field,
    opts: ForwardOptions,
) -> Result<ForwardDefect, SolveError> {
    check_shape(model, v)?;
    check_shape(model, mu)?;
    let mut work = mu.clone();
    sweep(model, v, &mut work, opts, true).map(|(_, d)| d)
}

fn merge(a: (ForwardStats, ForwardDefect), b: (ForwardStats, ForwardDefect)) -> (ForwardStats, ForwardDefect) {
    (
        ForwardStats {
            clipped: a.0.clipped + b.0.clipped,
            max_clip: a.0.max_clip.max(b.0.max_clip),
        },
        ForwardDefect {
            initial: a.1.initial.max(b.1.initial),
            step: a.1.step.max(b.1.step),
            relocation: a.1.relocation.max(b.1.relocation),
        },
    )
}

fn sweep<M: GameModel + ?Sized>(
    model: &M,
    v: &Field,
    mu: &mut Field,
    opts: ForwardOptions,
    defect: bool,
) -> Result<(ForwardStats, ForwardDefect), SolveError> {
    let lattice = v.lattice().clone();
    let s = model.state_count();
    let mut total = (ForwardStats::default(), ForwardDefect::default());
    let cap = lattice.cap();
    for k in 0..=cap {
        let (below, chunks, _) = mu.split_level_mut(k);
        let below = LevelView {
            states: s,
            base_point: 0,
            data: below,
        };
        let ctx = Ctx {
            model,
            lattice: &lattice,
            v,
            below,
            k,
            opts,
            defect,
        };
        let level = chunks
            .into_par_iter()
            .zip(lattice.level(k).into_par_iter())
            .map(|(out, id)| ctx.solve_node(id, out))
            .try_reduce(Default::default, |a, b| Ok(merge(a, b)))?;
        total = merge(total, level);
    }
    Ok(total)
}

struct Ctx<'a, M: ?Sized> {
    model: &'a M,
    lattice: &'a Lattice,
    v: &'a Field,
    below: LevelView<'a>,
    k: usize,
    opts: ForwardOptions,
    defect: bool,
}

impl<M: GameModel + ?Sized> Ctx<'_, M> {
    fn solve_node(
        &self,
        id: usize,
        out: &mut [f64],
    ) -> Result<(ForwardStats, ForwardDefect), SolveError> {
        let model = self.model;
        let grid = self.lattice.grid();
        let node = self.lattice.node(id);
        let s = model.state_count();
        let (p, n) = (node.start, grid.steps());
        let dt = grid.dt();
        let at = |m: usize| (m - p) * s;
        let mut stats = ForwardStats::default();
        let mut def = ForwardDefect::default();

        let mut y_new = vec![0.0; s];
        match node.parent {
            None => y_new.copy_from_slice(model.initial_distribution()),
            Some(parent) => {
                let t = grid.node(p);
                let prev = self.below.at(self.lattice.node(parent), p);
                let jmap: Vec<usize> = (0..s).map(|i| model.relocate_state(t, i)).collect();
                relocate(prev, &jmap, &mut y_new);
            }
        }
        if self.defect {
            let d = max_diff(&out[..s], &y_new);
            if node.parent.is_none() {
                def.initial = d;
            } else {
                def.relocation = d;
            }
        } else {
            out[..s].copy_from_slice(&y_new);
        }

        let v_node = self.v.node_values(id);
        let mut sc = Scratch::new(s);
        let mut v_mid = vec![0.0; s];
        let mut actions = vec![0.0; s];
        for m in p..n {
            let (t0, t1) = (grid.node(m), grid.node(m + 1));
            let tm = 0.5 * (t0 + t1);
            for i in 0..s {
                v_mid[i] = midpoint(|j| v_node[(j - p) * s + i], m, p, n);
            }
            let v0 = &v_node[at(m)..at(m) + s];
            let v1 = &v_node[at(m + 1)..at(m + 1) + s];
            let (left, right) = out.split_at_mut(at(m + 1));
            let y0 = &left[at(m)..at(m) + s];
            let y1 = &mut right[..s];

            let frozen = if self.opts.frozen_policy {
                for j in 0..s {
                    actions[j] = model.hamiltonian_max(t0, self.k, y0, v0, j, &mut sc.row)?.0;
                }
                Some(&actions[..])
            } else {
                None
            };
            self.rhs(t0, y0, v0, frozen, &mut sc.k1, &mut sc.row)?;
            axpy(y0, 0.5 * dt, &sc.k1, &mut sc.y);
            self.rhs(tm, &sc.y, &v_mid, frozen, &mut sc.k2, &mut sc.row)?;
            axpy(y0, 0.5 * dt, &sc.k2, &mut sc.y);
            self.rhs(tm, &sc.y, &v_mid, frozen, &mut sc.k3, &mut sc.row)?;
            axpy(y0, dt, &sc.k3, &mut sc.y);
            self.rhs(t1, &sc.y, v1, frozen, &mut sc.k4, &mut sc.row)?;
            for i in 0..s {
                y_new[i] =
                    y0[i] + dt / 6.0 * (sc.k1[i] + 2.0 * sc.k2[i] + 2.0 * sc.k3[i] + sc.k4[i]);
            }
            let moved = repair(&mut y_new).map_err(|(state, value)| SolveError::NegativeMass {
                node: id,
                time: m + 1,
                state,
                value,
            })?;
            if moved > 0.0 {
                stats.clipped += 1;
                stats.max_clip = stats.max_clip.max(moved);
            }
            if self.defect {
                def.step = def.step.max(max_diff(y1, &y_new));
            } else {
                y1.copy_from_slice(&y_new);
            }
        }
        Ok((stats, def))
    }

    /// `d mu^i / dt = sum_j mu^j Q^{ji}` under the optimal feedback.
    fn rhs(
        &self,
        t: f64,
        mu: &[f64],
        v: &[f64],
        frozen: Option<&[f64]>,
        out: &mut [f64],
        row: &mut [f64],
    ) -> Result<(), SolveError> {
        out.iter_mut().for_each(|x| *x = 0.0);
        for j in 0..mu.len() {
            match frozen {
                Some(a) => self.model.generator_row(t, self.k, mu, j, a[j], row),
                None => {
                    self.model.hamiltonian_max(t, self.k, mu, v, j, row)?;
                }
            }
            let w = mu[j];
            for (o, q) in out.iter_mut().zip(row.iter()) {
                *o += w * q;
            }
        }
        Ok(())
    }
}

/// Clips tiny negative components and renormalises. Returns the clipped
/// mass, or the offending component if it is too negative.
fn repair(y: &mut [f64]) -> Result<f64, (usize, f64)> {
    let mut moved = 0.0;
    for (i, x) in y.iter_mut().enumerate() {
        if *x < 0.0 {
            if *x < -NEGATIVE_MASS_TOL {
                return Err((i, *x));
            }
            moved -= *x;
            *x = 0.0;
        }
    }
    if moved > 0.0 {
        let sum: f64 = y.iter().sum();
        y.iter_mut().for_each(|x| *x /= sum);
    }
    Ok(moved)
}
