//! Shock-time parameter space on a uniform time grid.
//!
//! A [`ShockVector`] records which grid cells the first `z` common shocks
//! landed in. The [`Lattice`] enumerates every admissible vector up to the
//! shock cap, grouped by shock count, and lays them out so that fields can be
//! stored flat and solved level by level.

use std::fmt;

use thiserror::Error;

/// Default ceiling on the number of (node, time) points a lattice may hold.
pub const DEFAULT_POINT_BUDGET: usize = 50_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("shock vector is full (capacity {0})")]
    FullVector(usize),
    #[error("shock index {index} must exceed the last recorded index {last}")]
    NonMonotone { index: usize, last: usize },
    #[error("shock vector is empty")]
    EmptyVector,
    #[error("shock index {index} outside 1..={steps}")]
    OutOfRange { index: usize, steps: usize },
    #[error("invalid shock vector: {0}")]
    Invalid(String),
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("lattice needs {needed} points, budget is {budget}")]
    CapacityExceeded { needed: usize, budget: usize },
}

/// Uniform discretisation of `[0, T]` into `N` steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
    dt: f64,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self, LatticeError> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(LatticeError::InvalidGrid(format!(
                "horizon must be positive and finite, got {horizon}"
            )));
        }
        if steps < 2 {
            return Err(LatticeError::InvalidGrid(format!(
                "need at least 2 steps, got {steps}"
            )));
        }
        Ok(Self {
            horizon,
            steps,
            dt: horizon / steps as f64,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Time of grid node `i`; the last node is exactly the horizon.
    pub fn node(&self, i: usize) -> f64 {
        if i >= self.steps {
            self.horizon
        } else {
            i as f64 * self.dt
        }
    }

    /// Nearest grid index to `t`, clamped to `0..=N`.
    pub fn nearest(&self, t: f64) -> usize {
        let x = (t / self.dt).round();
        if x <= 0.0 {
            0
        } else {
            (x as usize).min(self.steps)
        }
    }
}

/// Ordered grid indices of the shocks seen so far, with room for `cap`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ShockVector {
    cap: usize,
    idx: Vec<usize>,
}

impl ShockVector {
    /// The vector with no recorded shocks.
    pub fn empty(cap: usize) -> Self {
        Self {
            cap,
            idx: Vec::with_capacity(cap),
        }
    }

    /// Builds a vector from recorded indices (no sentinels).
    pub fn from_indices(cap: usize, indices: &[usize]) -> Result<Self, LatticeError> {
        if indices.len() > cap {
            return Err(LatticeError::FullVector(cap));
        }
        let mut u = Self::empty(cap);
        for &i in indices {
            u = u.shift_forward(i)?;
        }
        Ok(u)
    }

    /// Builds a vector from `cap` slots where `None` marks a shock that has
    /// not happened. All recorded slots must precede the empty ones.
    pub fn from_slots(slots: &[Option<usize>]) -> Result<Self, LatticeError> {
        let z = slots.iter().take_while(|s| s.is_some()).count();
        if slots[z..].iter().any(|s| s.is_some()) {
            return Err(LatticeError::Invalid(
                "recorded shocks must precede empty slots".into(),
            ));
        }
        let idx: Vec<usize> = slots[..z].iter().map(|s| s.unwrap()).collect();
        Self::from_indices(slots.len(), &idx)
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    /// Number of recorded shocks.
    pub fn z(&self) -> usize {
        self.idx.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.idx
    }

    /// Slot view with `None` for shocks that have not occurred.
    pub fn slots(&self) -> Vec<Option<usize>> {
        (0..self.cap).map(|k| self.idx.get(k).copied()).collect()
    }

    /// Grid index of the latest shock, 0 if none.
    pub fn last_index(&self) -> usize {
        self.idx.last().copied().unwrap_or(0)
    }

    /// Records a shock at grid index `i`.
    pub fn shift_forward(&self, i: usize) -> Result<Self, LatticeError> {
        if self.idx.len() >= self.cap {
            return Err(LatticeError::FullVector(self.cap));
        }
        let last = self.last_index();
        if i == 0 || i <= last {
            return Err(LatticeError::NonMonotone { index: i, last });
        }
        let mut out = self.clone();
        out.idx.push(i);
        Ok(out)
    }

    /// Forgets the latest shock.
    pub fn shift_back(&self) -> Result<Self, LatticeError> {
        if self.idx.is_empty() {
            return Err(LatticeError::EmptyVector);
        }
        let mut out = self.clone();
        out.idx.pop();
        Ok(out)
    }

    /// Semicolon-joined indices, empty for the root.
    pub fn key(&self) -> String {
        self.idx
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(";")
    }
}

/// Number of shocks recorded in `u`.
pub fn z_of(u: &ShockVector) -> usize {
    u.z()
}

impl fmt::Display for ShockVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for k in 0..self.cap {
            if k > 0 {
                write!(f, ",")?;
            }
            match self.idx.get(k) {
                Some(i) => write!(f, "{i}")?,
                None => write!(f, "NONE")?,
            }
        }
        write!(f, ")")
    }
}

/// One shock vector together with its place in the lattice layout.
#[derive(Debug, Clone)]
pub struct LatticeNode {
    pub u: ShockVector,
    /// Grid index from which fields over this node are defined.
    pub start: usize,
    pub level: usize,
    /// Index of the node with the latest shock removed.
    pub parent: Option<usize>,
    /// Index of the child with a shock at `start + 1`; children are
    /// contiguous and ordered by the new shock index.
    pub first_child: Option<usize>,
    /// Offset of this node's first point in flat per-point storage.
    pub(crate) point_offset: usize,
}

impl LatticeNode {
    /// Number of grid times `start..=N` covered by the node.
    pub fn len(&self, steps: usize) -> usize {
        steps + 1 - self.start
    }

    pub fn is_empty(&self, steps: usize) -> bool {
        self.start > steps
    }
}

/// All grid-aligned shock vectors with at most `n` shocks.
#[derive(Debug, Clone)]
pub struct Lattice {
    grid: TimeGrid,
    cap: usize,
    nodes: Vec<LatticeNode>,
    level_start: Vec<usize>,
    total_points: usize,
}

impl Lattice {
    pub fn new(grid: TimeGrid, cap: usize) -> Result<Self, LatticeError> {
        Self::with_budget(grid, cap, DEFAULT_POINT_BUDGET)
    }

    pub fn with_budget(grid: TimeGrid, cap: usize, budget: usize) -> Result<Self, LatticeError> {
        let steps = grid.steps();
        let needed = point_count(steps, cap);
        if needed > budget as u128 {
            return Err(LatticeError::CapacityExceeded {
                needed: needed.min(usize::MAX as u128) as usize,
                budget,
            });
        }

        let mut nodes = vec![LatticeNode {
            u: ShockVector::empty(cap),
            start: 0,
            level: 0,
            parent: None,
            first_child: None,
            point_offset: 0,
        }];
        let mut level_start = vec![0usize, 1];
        for level in 1..=cap {
            let (lo, hi) = (level_start[level - 1], level_start[level]);
            for p in lo..hi {
                let start = nodes[p].start;
                if start >= steps {
                    continue;
                }
                nodes[p].first_child = Some(nodes.len());
                for i in start + 1..=steps {
                    let u = nodes[p].u.shift_forward(i)?;
                    nodes.push(LatticeNode {
                        u,
                        start: i,
                        level,
                        parent: Some(p),
                        first_child: None,
                        point_offset: 0,
                    });
                }
            }
            level_start.push(nodes.len());
        }

        let mut offset = 0;
        for node in nodes.iter_mut() {
            node.point_offset = offset;
            offset += node.len(steps);
        }
        Ok(Self {
            grid,
            cap,
            nodes,
            level_start,
            total_points: offset,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn nodes(&self) -> &[LatticeNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &LatticeNode {
        &self.nodes[id]
    }

    pub fn root(&self) -> usize {
        0
    }

    /// Node index range of shock-count group `k`.
    pub fn level(&self, k: usize) -> std::ops::Range<usize> {
        self.level_start[k]..self.level_start[k + 1]
    }

    pub fn level_sizes(&self) -> Vec<usize> {
        (0..=self.cap).map(|k| self.level(k).len()).collect()
    }

    /// Total number of (node, time) points.
    pub fn total_points(&self) -> usize {
        self.total_points
    }

    /// First point offset of group `k` (equal to the total for `k > cap`).
    pub(crate) fn level_point_offset(&self, k: usize) -> usize {
        if k > self.cap {
            self.total_points
        } else {
            self.nodes[self.level_start[k]].point_offset
        }
    }

    /// Child of `id` with its next shock at grid index `i`.
    pub fn child(&self, id: usize, i: usize) -> Option<usize> {
        let node = &self.nodes[id];
        let first = node.first_child?;
        if i <= node.start || i > self.grid.steps() {
            return None;
        }
        Some(first + (i - node.start - 1))
    }

    /// Looks up the node of a shock vector.
    pub fn node_of(&self, u: &ShockVector) -> Option<usize> {
        if u.z() > self.cap {
            return None;
        }
        let mut id = self.root();
        for &i in u.indices() {
            id = self.child(id, i)?;
        }
        Some(id)
    }
}

/// Exact Σ_k C(N,k)·(N+1−start) without building anything.
fn point_count(steps: usize, cap: usize) -> u128 {
    // cnt[s] = number of level-k nodes whose last shock is s.
    let mut cnt = vec![0u128; steps + 1];
    cnt[0] = 1;
    let mut total = (steps + 1) as u128;
    for _ in 1..=cap {
        let mut next = vec![0u128; steps + 1];
        let mut prefix = 0u128;
        for s in 1..=steps {
            prefix += cnt[s - 1];
            next[s] = prefix;
        }
        for (s, c) in next.iter().enumerate() {
            total = total.saturating_add(c * (steps + 1 - s) as u128);
        }
        cnt = next;
    }
    total
}

/// Groups of nodes by shock count, as `ShockVector`s.
pub fn enumerate_nodes(grid: TimeGrid, n: usize) -> Result<Vec<Vec<ShockVector>>, LatticeError> {
    let lat = Lattice::new(grid, n)?;
    Ok((0..=n)
        .map(|k| lat.level(k).map(|id| lat.node(id).u.clone()).collect())
        .collect())
}
