//! Vector-valued functions on the lattice, stored flat.

use std::sync::Arc;

use crate::lattice::{Lattice, LatticeNode, TimeGrid};

/// Values in `R^S` at every (node, time index) of a lattice.
///
/// Points of node `id` cover grid indices `start..=N`; groups are stored in
/// increasing shock count so that one group can be written while others are
/// read.
#[derive(Debug, Clone)]
pub struct Field {
    lattice: Arc<Lattice>,
    states: usize,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(lattice: Arc<Lattice>, states: usize) -> Self {
        let len = lattice.total_points() * states;
        Self {
            lattice,
            states,
            values: vec![0.0; len],
        }
    }

    /// Field equal to `m` everywhere.
    pub fn constant(lattice: Arc<Lattice>, m: &[f64]) -> Self {
        let mut f = Self::zeros(lattice, m.len());
        for chunk in f.values.chunks_exact_mut(m.len()) {
            chunk.copy_from_slice(m);
        }
        f
    }

    pub fn from_values(lattice: Arc<Lattice>, states: usize, values: Vec<f64>) -> Option<Self> {
        (values.len() == lattice.total_points() * states).then_some(Self {
            lattice,
            states,
            values,
        })
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn grid(&self) -> &TimeGrid {
        self.lattice.grid()
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// All points of one node, `(N + 1 - start) * S` values.
    pub fn node_values(&self, id: usize) -> &[f64] {
        let node = self.lattice.node(id);
        let s = self.states;
        let len = node.len(self.lattice.grid().steps()) * s;
        &self.values[node.point_offset * s..node.point_offset * s + len]
    }

    /// Value at node `id` and grid index `m >= start`.
    pub fn at(&self, id: usize, m: usize) -> &[f64] {
        let node = self.lattice.node(id);
        debug_assert!(m >= node.start && m <= self.lattice.grid().steps());
        let s = self.states;
        let off = (node.point_offset + m - node.start) * s;
        &self.values[off..off + s]
    }

    pub fn at_mut(&mut self, id: usize, m: usize) -> &mut [f64] {
        let node = self.lattice.node(id);
        let s = self.states;
        let off = (node.point_offset + m - node.start) * s;
        &mut self.values[off..off + s]
    }

    /// Linear interpolation in time at node `id`; `t` is clamped to the
    /// node's domain.
    pub fn interp_into(&self, id: usize, t: f64, out: &mut [f64]) {
        let grid = self.lattice.grid();
        let node = self.lattice.node(id);
        let lo_t = grid.node(node.start);
        let t = t.clamp(lo_t, grid.horizon());
        let x = t / grid.dt();
        let mut m = (x.floor() as usize).max(node.start);
        if m >= grid.steps() {
            m = grid.steps();
            out.copy_from_slice(self.at(id, m));
            return;
        }
        let w = (x - m as f64).clamp(0.0, 1.0);
        let a = self.at(id, m);
        let b = self.at(id, m + 1);
        for s in 0..self.states {
            out[s] = (1.0 - w) * a[s] + w * b[s];
        }
    }

    /// Sup-norm distance to another field on the same lattice.
    pub fn sup_distance(&self, other: &Field) -> f64 {
        assert_eq!(self.values.len(), other.values.len());
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |acc, a| acc.max(a.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|x| x.is_finite())
    }

    /// Splits storage into `(groups < k, group k, groups > k)`, with group k
    /// further split per node.
    pub(crate) fn split_level_mut(&mut self, k: usize) -> (&[f64], Vec<&mut [f64]>, &[f64]) {
        let s = self.states;
        let steps = self.lattice.grid().steps();
        let lo = self.lattice.level_point_offset(k) * s;
        let hi = self.lattice.level_point_offset(k + 1) * s;
        let (below, rest) = self.values.split_at_mut(lo);
        let (mid, above) = rest.split_at_mut(hi - lo);
        let mut chunks = Vec::with_capacity(self.lattice.level(k).len());
        let mut tail = mid;
        for id in self.lattice.level(k) {
            let len = self.lattice.node(id).len(steps) * s;
            let (head, t) = tail.split_at_mut(len);
            chunks.push(head);
            tail = t;
        }
        (below, chunks, above)
    }
}

/// Read-only access into a storage slice that starts at some group offset.
#[derive(Clone, Copy)]
pub(crate) struct LevelView<'a> {
    pub states: usize,
    pub base_point: usize,
    pub data: &'a [f64],
}

impl<'a> LevelView<'a> {
    pub fn at(&self, node: &LatticeNode, m: usize) -> &'a [f64] {
        let off = (node.point_offset - self.base_point + m - node.start) * self.states;
        &self.data[off..off + self.states]
    }
}

/// Value at the midpoint of `[m, m+1]` from samples `f(j)` available for
/// `j` in `lo..=hi`. Cubic when both neighbours exist, one-sided quadratic
/// at the edges, linear when only the two endpoints are known.
#[inline]
pub(crate) fn midpoint<F: Fn(usize) -> f64>(f: F, m: usize, lo: usize, hi: usize) -> f64 {
    debug_assert!(lo <= m && m < hi);
    let left = m > lo;
    let right = m + 2 <= hi;
    match (left, right) {
        (true, true) => (9.0 * (f(m) + f(m + 1)) - f(m - 1) - f(m + 2)) / 16.0,
        (false, true) => (3.0 * f(m) + 6.0 * f(m + 1) - f(m + 2)) / 8.0,
        (true, false) => (-f(m - 1) + 6.0 * f(m) + 3.0 * f(m + 1)) / 8.0,
        (false, false) => 0.5 * (f(m) + f(m + 1)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midpoint_is_exact_for_cubics() {
        let p = |x: f64| 1.0 - 2.0 * x + 0.5 * x * x - 0.25 * x * x * x;
        let f = |j: usize| p(j as f64);
        assert!((midpoint(f, 3, 0, 8) - p(3.5)).abs() < 1e-12);
        let q = |x: f64| 2.0 + x - 3.0 * x * x;
        let g = |j: usize| q(j as f64);
        assert!((midpoint(g, 0, 0, 8) - q(0.5)).abs() < 1e-12);
        assert!((midpoint(g, 7, 0, 8) - q(7.5)).abs() < 1e-12);
        assert!((midpoint(g, 4, 4, 5) - q(4.5)).abs() < 0.76);
    }

    #[test]
    fn layout_roundtrip() {
        let grid = TimeGrid::new(1.0, 5).unwrap();
        let lat = Arc::new(Lattice::new(grid, 2).unwrap());
        let mut f = Field::zeros(lat.clone(), 2);
        for id in 0..lat.nodes().len() {
            let start = lat.node(id).start;
            for m in start..=5 {
                f.at_mut(id, m).copy_from_slice(&[id as f64, m as f64]);
            }
        }
        for id in 0..lat.nodes().len() {
            for m in lat.node(id).start..=5 {
                assert_eq!(f.at(id, m), &[id as f64, m as f64]);
            }
        }
        let mut out = [0.0; 2];
        f.interp_into(0, 0.3, &mut out);
        assert!((out[1] - 1.5).abs() < 1e-12);
    }
}
