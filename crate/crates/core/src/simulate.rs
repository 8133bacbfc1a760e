//! Monte-Carlo checks of a solved equilibrium.
//!
//! Shock and agent paths are sampled in continuous time by thinning against
//! constant envelopes. Shock times stay exact for the dynamics and are
//! rounded to the grid only to pick the lattice node whose fields are read.
//!
//! Every path `p` draws from its own ChaCha stream of the root seed (stream
//! `2p` for shocks, `2p + 1` for the agent), so results do not depend on how
//! the work is split across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{self, BoundsData, Lipschitz};
use crate::equilibrium::EquilibriumSolution;
use crate::field::Field;
use crate::lattice::{Lattice, TimeGrid};
use crate::model::{Extrema, GameModel};

/// Shock arrivals along one path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShockPath {
    /// Exact arrival times, increasing, in `(0, T]`.
    pub times: Vec<f64>,
    /// Grid indices used for field lookups, strictly increasing.
    pub indices: Vec<usize>,
    /// Shocks whose grid index had to be moved off the nearest node.
    pub rounding_collisions: usize,
    /// Thinning candidates drawn and accepted.
    pub candidates: usize,
    pub accepted: usize,
    /// Sum of `lambda / envelope` over candidates.
    pub acceptance_mass: f64,
}

impl ShockPath {
    pub fn empty() -> Self {
        Self {
            times: vec![],
            indices: vec![],
            rounding_collisions: 0,
            candidates: 0,
            accepted: 0,
            acceptance_mass: 0.0,
        }
    }

    /// Builds a path from exact times, rounding them onto the grid.
    pub fn from_times(grid: &TimeGrid, times: &[f64]) -> Self {
        let mut p = Self::empty();
        for &t in times {
            p.push(grid, t);
        }
        p
    }

    fn push(&mut self, grid: &TimeGrid, t: f64) {
        let last = self.indices.last().copied().unwrap_or(0);
        let nearest = grid.nearest(t).max(1);
        let mut idx = nearest.max(last + 1);
        if idx != nearest {
            self.rounding_collisions += 1;
        }
        if idx > grid.steps() {
            idx = grid.steps();
            let mut next = idx;
            for j in (0..self.indices.len()).rev() {
                if self.indices[j] >= next {
                    self.indices[j] = next - 1;
                    self.rounding_collisions += 1;
                }
                next = self.indices[j];
            }
        }
        self.times.push(t);
        self.indices.push(idx);
    }

    /// Lattice node after the first `l` shocks.
    pub fn node_after(&self, lattice: &Lattice, l: usize) -> usize {
        let mut id = lattice.root();
        for &i in &self.indices[..l] {
            id = lattice.child(id, i).expect("shock indices fit the lattice");
        }
        id
    }

    /// Number of shocks with exact time at or before `t`.
    pub fn count_by(&self, t: f64) -> usize {
        self.times.iter().take_while(|&&s| s <= t).count()
    }
}

/// Trajectory of one agent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentPath {
    /// Times at which the state changed; the first entry is `0`.
    pub jump_times: Vec<f64>,
    /// State from the matching jump time on.
    pub states: Vec<usize>,
    /// Action chosen in the new state at each jump time.
    pub actions: Vec<f64>,
    /// Integrated running reward plus terminal reward.
    pub reward: f64,
}

impl AgentPath {
    /// State at `t`, after any jump at `t`.
    pub fn state_at(&self, t: f64) -> usize {
        let k = self.jump_times.partition_point(|&s| s <= t);
        self.states[k.max(1) - 1]
    }

    /// State just before `t`.
    pub fn state_before(&self, t: f64) -> usize {
        let k = self.jump_times.partition_point(|&s| s < t);
        self.states[k.max(1) - 1]
    }
}

/// Monte-Carlo estimate of a scalar expectation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McReport {
    pub estimate: f64,
    pub std_error: f64,
    pub paths: usize,
    pub seed: u64,
}

impl McReport {
    fn from_samples(samples: &[f64], seed: u64) -> Self {
        let n = samples.len();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            estimate: mean,
            std_error: (var / n as f64).sqrt(),
            paths: n,
            seed,
        }
    }
}

/// Distance between an empirical population and the solved distribution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateReport {
    pub agents: usize,
    /// Largest total-variation distance over grid times.
    pub sup_tv: f64,
    /// Grid index where it is attained.
    pub worst_index: usize,
    /// Empirical shares at every grid time, `(N + 1) x S`.
    pub empirical: Vec<Vec<f64>>,
    /// Solved shares along the same shock path.
    pub solved: Vec<Vec<f64>>,
}

/// Time-averaged state shares along sampled shock paths.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SharesReport {
    pub shares: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub paths: usize,
    pub seed: u64,
    /// Probability of more than `n` shocks by `T` at unit intensity.
    pub prob_more_shocks: f64,
    /// Bound on the value error from truncating at `n` shocks.
    pub value_gap_bound: f64,
}

/// Likelihood ratio of one reference path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Weight {
    pub value: f64,
    /// A jump happened where the target intensity vanishes; `value` is 0.
    pub zero_intensity_jump: bool,
}

/// A path sampled under the reference measure, where every counting
/// process fires at unit rate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferencePath {
    pub shocks: ShockPath,
    pub agent: AgentPath,
    /// Firings `(time, from, to)` of the transition clocks, moving the
    /// agent only when it sits in `from`.
    pub firings: Vec<(f64, usize, usize)>,
}

/// Markov feedback rule: action from time, lattice node and own state.
pub trait FeedbackPolicy: Sync {
    fn action(&self, t: f64, node: usize, state: usize) -> f64;
}

/// The optimiser of the Hamiltonian along the solved fields.
pub struct EquilibriumPolicy<'a, M: ?Sized> {
    sim: Simulator<'a, M>,
}

impl<'a, M: GameModel + ?Sized> EquilibriumPolicy<'a, M> {
    pub fn new(model: &'a M, sol: &'a EquilibriumSolution) -> Self {
        Self {
            sim: Simulator::new(model, sol),
        }
    }
}

impl<M: GameModel + ?Sized> FeedbackPolicy for EquilibriumPolicy<'_, M> {
    fn action(&self, t: f64, node: usize, state: usize) -> f64 {
        let s = self.sim.model.state_count();
        let mut buf = Buf::new(s);
        self.sim.point(node, t, &mut buf);
        self.sim.optimum(t, node, state, &mut buf).0
    }
}

struct Buf {
    mu: Vec<f64>,
    v: Vec<f64>,
    row: Vec<f64>,
}

impl Buf {
    fn new(s: usize) -> Self {
        Self {
            mu: vec![0.0; s],
            v: vec![0.0; s],
            row: vec![0.0; s],
        }
    }
}

/// Path sampler bound to a model and a solution.
pub struct Simulator<'a, M: ?Sized> {
    model: &'a M,
    mu: &'a Field,
    v: &'a Field,
    lattice: &'a Lattice,
    grid: TimeGrid,
    ext: Extrema,
}

impl<M: ?Sized> Clone for Simulator<'_, M> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<M: ?Sized> Copy for Simulator<'_, M> {}

pub fn path_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn exp_draw<R: Rng>(rng: &mut R, rate: f64) -> f64 {
    -(1.0 - rng.random::<f64>()).ln() / rate
}

fn pick<R: Rng>(rng: &mut R, weights: &[f64], skip: usize) -> usize {
    let total: f64 = weights
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != skip)
        .map(|(_, w)| w.max(0.0))
        .sum();
    let mut u = rng.random::<f64>() * total;
    let mut last = skip;
    for (j, w) in weights.iter().enumerate() {
        if j == skip || *w <= 0.0 {
            continue;
        }
        last = j;
        if u < *w {
            return j;
        }
        u -= w;
    }
    last
}

/// Trapezoid rule on `[a, b]` split at every grid node inside.
fn integrate<F: FnMut(f64) -> f64>(grid: &TimeGrid, a: f64, b: f64, mut f: F) -> f64 {
    if b <= a {
        return 0.0;
    }
    let dt = grid.dt();
    let mut total = 0.0;
    let mut l = a;
    let mut fl = f(l);
    let mut m = (a / dt).floor() as usize + 1;
    loop {
        let r = if m <= grid.steps() { grid.node(m).min(b) } else { b };
        let r = if r <= l { b.min(l.max(r)) } else { r };
        let fr = f(r);
        total += 0.5 * (fl + fr) * (r - l);
        if r >= b {
            break;
        }
        l = r;
        fl = fr;
        m += 1;
    }
    total
}

impl<'a, M: GameModel + ?Sized> Simulator<'a, M> {
    pub fn new(model: &'a M, sol: &'a EquilibriumSolution) -> Self {
        Self::from_fields(model, &sol.mu, &sol.v)
    }

    pub fn from_fields(model: &'a M, mu: &'a Field, v: &'a Field) -> Self {
        Self {
            model,
            mu,
            v,
            lattice: mu.lattice(),
            grid: *mu.grid(),
            ext: model.extrema(),
        }
    }

    fn point(&self, node: usize, t: f64, buf: &mut Buf) {
        self.mu.interp_into(node, t, &mut buf.mu);
        self.v.interp_into(node, t, &mut buf.v);
    }

    /// `(a*, psi_hat)` for `state`, leaving the generator row in `buf.row`.
    fn optimum(&self, t: f64, node: usize, state: usize, buf: &mut Buf) -> (f64, f64) {
        let k = self.lattice.node(node).level;
        self.model
            .hamiltonian_max(t, k, &buf.mu, &buf.v, state, &mut buf.row)
            .expect("model evaluates to finite values on solved fields")
    }

    /// Samples shock arrivals by thinning with envelope `lambda_max`.
    pub fn sample_shock_path<R: Rng>(&self, rng: &mut R) -> ShockPath {
        let env = self.ext.lambda_max;
        let cap = self.lattice.cap();
        let horizon = self.grid.horizon();
        let mut path = ShockPath::empty();
        let mut mu = vec![0.0; self.model.state_count()];
        if env <= 0.0 {
            return path;
        }
        let mut t = 0.0;
        let mut node = self.lattice.root();
        while path.times.len() < cap {
            t += exp_draw(rng, env);
            if t > horizon {
                break;
            }
            let k = path.times.len();
            self.mu.interp_into(node, t, &mut mu);
            let lam = self.model.shock_intensity(k + 1, t, &mu);
            path.candidates += 1;
            path.acceptance_mass += lam / env;
            if rng.random::<f64>() * env < lam {
                path.accepted += 1;
                path.push(&self.grid, t);
                node = path.node_after(self.lattice, path.times.len());
            }
        }
        path
    }

    /// Simulates the agent under the equilibrium feedback along `shocks`.
    pub fn sample_agent_path<R: Rng>(&self, shocks: &ShockPath, rng: &mut R, with_reward: bool) -> AgentPath {
        let s = self.model.state_count();
        let env = self.ext.q_max;
        let horizon = self.grid.horizon();
        let mut buf = Buf::new(s);
        let m0 = self.model.initial_distribution();
        let mut x = pick(rng, m0, usize::MAX);
        let mut path = AgentPath {
            jump_times: vec![0.0],
            states: vec![x],
            actions: vec![],
            reward: 0.0,
        };
        self.point(self.lattice.root(), 0.0, &mut buf);
        path.actions.push(self.optimum(0.0, self.lattice.root(), x, &mut buf).0);

        let mut reward = 0.0;
        let segments = shocks.times.len() + 1;
        for l in 0..segments {
            let node = shocks.node_after(self.lattice, l);
            let a = if l == 0 { 0.0 } else { shocks.times[l - 1] };
            let b = shocks.times.get(l).copied().unwrap_or(horizon);
            if l > 0 {
                let y = self.model.relocate_state(a, x);
                if y != x {
                    x = y;
                    self.point(node, a, &mut buf);
                    path.jump_times.push(a);
                    path.states.push(x);
                    path.actions.push(self.optimum(a, node, x, &mut buf).0);
                }
            }
            let (mut t, mut from) = (a, a);
            loop {
                t = if env > 0.0 { t + exp_draw(rng, env) } else { f64::INFINITY };
                if t >= b {
                    if with_reward {
                        reward += self.running(node, x, from, b, &mut buf);
                    }
                    break;
                }
                self.point(node, t, &mut buf);
                self.optimum(t, node, x, &mut buf);
                let out_rate = -buf.row[x];
                debug_assert!(out_rate <= env * (1.0 + 1e-12));
                if rng.random::<f64>() * env < out_rate {
                    let y = pick(rng, &buf.row, x);
                    if with_reward {
                        reward += self.running(node, x, from, t, &mut buf);
                    }
                    x = y;
                    from = t;
                    self.point(node, t, &mut buf);
                    path.jump_times.push(t);
                    path.states.push(x);
                    path.actions.push(self.optimum(t, node, x, &mut buf).0);
                }
            }
        }
        if with_reward {
            let last = shocks.node_after(self.lattice, shocks.times.len());
            let k = self.lattice.node(last).level;
            let mut out = vec![0.0; s];
            self.model
                .terminal_reward(k, self.mu.at(last, self.grid.steps()), &mut out);
            reward += out[x];
        }
        path.reward = reward;
        path
    }

    /// `int_a^b psi_hat(t, node, x) dt`.
    fn running(&self, node: usize, x: usize, a: f64, b: f64, buf: &mut Buf) -> f64 {
        integrate(&self.grid, a, b, |t| {
            self.point(node, t, buf);
            self.optimum(t, node, x, buf).1
        })
    }

    /// Samples under the reference measure: shocks at unit rate while fewer
    /// than `n` have occurred, and one unit-rate clock per ordered pair of
    /// distinct states.
    pub fn sample_reference_path<R: Rng>(&self, rng: &mut R) -> ReferencePath {
        let s = self.model.state_count();
        let cap = self.lattice.cap();
        let horizon = self.grid.horizon();
        let mut shocks = ShockPath::empty();
        let mut t = 0.0;
        while shocks.times.len() < cap {
            t += exp_draw(rng, 1.0);
            if t > horizon {
                break;
            }
            shocks.candidates += 1;
            shocks.accepted += 1;
            shocks.acceptance_mass += 1.0;
            shocks.push(&self.grid, t);
        }

        let m0 = self.model.initial_distribution();
        let mut x = pick(rng, m0, usize::MAX);
        let mut agent = AgentPath {
            jump_times: vec![0.0],
            states: vec![x],
            actions: vec![],
            reward: 0.0,
        };
        let mut firings = Vec::new();
        let pairs = (s * (s - 1)) as f64;
        for l in 0..=shocks.times.len() {
            let a = if l == 0 { 0.0 } else { shocks.times[l - 1] };
            let b = shocks.times.get(l).copied().unwrap_or(horizon);
            if l > 0 {
                let y = self.model.relocate_state(a, x);
                if y != x {
                    x = y;
                    agent.jump_times.push(a);
                    agent.states.push(x);
                }
            }
            if pairs == 0.0 {
                continue;
            }
            let mut t = a;
            loop {
                t += exp_draw(rng, pairs);
                if t >= b {
                    break;
                }
                let c = rng.random_range(0..s * (s - 1));
                let i = c / (s - 1);
                let mut j = c % (s - 1);
                if j >= i {
                    j += 1;
                }
                firings.push((t, i, j));
                if i == x {
                    x = j;
                    agent.jump_times.push(t);
                    agent.states.push(x);
                }
            }
        }
        ReferencePath {
            shocks,
            agent,
            firings,
        }
    }

    /// Likelihood ratio of the target measure induced by `policy` against
    /// the reference measure, along a reference path.
    pub fn likelihood_weight<P: FeedbackPolicy + ?Sized>(&self, path: &ReferencePath, policy: &P) -> Weight {
        let s = self.model.state_count();
        let cap = self.lattice.cap();
        let horizon = self.grid.horizon();
        let shocks = &path.shocks;
        let mut mu = vec![0.0; s];
        let mut row = vec![0.0; s];
        let mut log_w = 0.0;
        let mut zero = false;

        for l in 0..=shocks.times.len() {
            let node = shocks.node_after(self.lattice, l);
            let a = if l == 0 { 0.0 } else { shocks.times[l - 1] };
            let b = shocks.times.get(l).copied().unwrap_or(horizon);
            if l > 0 {
                let mut prev = vec![0.0; s];
                let parent = shocks.node_after(self.lattice, l - 1);
                self.mu.interp_into(parent, a, &mut prev);
                let lam = self.model.shock_intensity(l, a, &prev);
                if lam > 0.0 {
                    log_w += lam.ln();
                } else {
                    zero = true;
                }
            }
            let k = self.lattice.node(node).level;
            // Split at the agent's own jumps so the action is constant.
            let mut cuts = vec![a];
            for &tj in &path.agent.jump_times {
                if tj > a && tj < b {
                    cuts.push(tj);
                }
            }
            cuts.push(b);
            for w in cuts.windows(2) {
                let (lo, hi) = (w[0], w[1]);
                let x = path.agent.state_at(0.5 * (lo + hi));
                log_w += integrate(&self.grid, lo, hi, |t| {
                    self.mu.interp_into(node, t, &mut mu);
                    let act = policy.action(t, node, x);
                    let mut f = 0.0;
                    for i in 0..s {
                        self.model.generator_row(t, k, &mu, i, act, &mut row);
                        for (j, q) in row.iter().enumerate() {
                            if j != i {
                                f += 1.0 - q;
                            }
                        }
                    }
                    if k < cap {
                        f += 1.0 - self.model.shock_intensity(k + 1, t, &mu);
                    }
                    f
                });
            }
            for &(t, i, j) in &path.firings {
                if t <= a || t >= b {
                    continue;
                }
                self.mu.interp_into(node, t, &mut mu);
                let act = policy.action(t, node, path.agent.state_before(t));
                self.model.generator_row(t, k, &mu, i, act, &mut row);
                let q = row[j];
                if q > 0.0 {
                    log_w += q.ln();
                } else {
                    zero = true;
                }
            }
        }
        Weight {
            value: if zero { 0.0 } else { log_w.exp() },
            zero_intensity_jump: zero,
        }
    }

    /// Reward of `policy` along a given agent and shock path.
    pub fn path_reward<P: FeedbackPolicy + ?Sized>(&self, shocks: &ShockPath, agent: &AgentPath, policy: &P) -> f64 {
        let s = self.model.state_count();
        let horizon = self.grid.horizon();
        let mut mu = vec![0.0; s];
        let mut reward = 0.0;
        for l in 0..=shocks.times.len() {
            let node = shocks.node_after(self.lattice, l);
            let k = self.lattice.node(node).level;
            let a = if l == 0 { 0.0 } else { shocks.times[l - 1] };
            let b = shocks.times.get(l).copied().unwrap_or(horizon);
            let mut cuts = vec![a];
            for &tj in &agent.jump_times {
                if tj > a && tj < b {
                    cuts.push(tj);
                }
            }
            cuts.push(b);
            for w in cuts.windows(2) {
                let x = agent.state_at(0.5 * (w[0] + w[1]));
                reward += integrate(&self.grid, w[0], w[1], |t| {
                    self.mu.interp_into(node, t, &mut mu);
                    let act = policy.action(t, node, x);
                    self.model.running_reward(t, k, &mu, x, act)
                });
            }
        }
        let last = shocks.node_after(self.lattice, shocks.times.len());
        let mut out = vec![0.0; s];
        self.model.terminal_reward(
            self.lattice.node(last).level,
            self.mu.at(last, self.grid.steps()),
            &mut out,
        );
        reward + out[agent.state_at(horizon)]
    }

    /// `int_0^T mu(t, U_t) dt` with shocks placed at their grid nodes.
    pub fn integrated_shares(&self, shocks: &ShockPath) -> Vec<f64> {
        let s = self.model.state_count();
        let n = self.grid.steps();
        let dt = self.grid.dt();
        let mut acc = vec![0.0; s];
        let mut l = 0;
        let mut node = self.lattice.root();
        for m in 0..n {
            while l < shocks.indices.len() && shocks.indices[l] <= m {
                l += 1;
                node = shocks.node_after(self.lattice, l);
            }
            let a = self.mu.at(node, m);
            let b = self.mu.at(node, m + 1);
            for i in 0..s {
                acc[i] += 0.5 * dt * (a[i] + b[i]);
            }
        }
        acc
    }
}

/// Samples one shock path from the root seed and path index.
pub fn sample_shock_path<M: GameModel + ?Sized>(
    model: &M,
    sol: &EquilibriumSolution,
    seed: u64,
    path: u64,
) -> ShockPath {
    Simulator::new(model, sol).sample_shock_path(&mut path_rng(seed, 2 * path))
}

/// Samples one agent along `shocks` from the root seed and path index.
pub fn sample_agent_path<M: GameModel + ?Sized>(
    model: &M,
    sol: &EquilibriumSolution,
    shocks: &ShockPath,
    seed: u64,
    path: u64,
) -> AgentPath {
    Simulator::new(model, sol).sample_agent_path(shocks, &mut path_rng(seed, 2 * path + 1), true)
}

/// Mean reward of the equilibrium feedback over independent paths.
pub fn mc_value<M: GameModel + ?Sized>(model: &M, sol: &EquilibriumSolution, paths: usize, seed: u64) -> McReport {
    let sim = Simulator::new(model, sol);
    let rewards: Vec<f64> = (0..paths)
        .into_par_iter()
        .map(|p| {
            let p = p as u64;
            let shocks = sim.sample_shock_path(&mut path_rng(seed, 2 * p));
            sim.sample_agent_path(&shocks, &mut path_rng(seed, 2 * p + 1), true)
                .reward
        })
        .collect();
    McReport::from_samples(&rewards, seed)
}

/// Importance-sampling estimate of the equilibrium value from paths drawn
/// under the reference measure.
pub fn mc_value_reference<M: GameModel + ?Sized>(
    model: &M,
    sol: &EquilibriumSolution,
    paths: usize,
    seed: u64,
) -> McReport {
    let sim = Simulator::new(model, sol);
    let policy = EquilibriumPolicy::new(model, sol);
    let samples: Vec<f64> = (0..paths)
        .into_par_iter()
        .map(|p| {
            let p = p as u64;
            let path = sim.sample_reference_path(&mut path_rng(seed, 2 * p));
            let w = sim.likelihood_weight(&path, &policy);
            if w.value == 0.0 {
                0.0
            } else {
                w.value * sim.path_reward(&path.shocks, &path.agent, &policy)
            }
        })
        .collect();
    McReport::from_samples(&samples, seed)
}

/// Likelihood ratio of a reference path under the feedback `policy`.
pub fn likelihood_weight<M: GameModel + ?Sized, P: FeedbackPolicy + ?Sized>(
    model: &M,
    mu: &Field,
    v: &Field,
    path: &ReferencePath,
    policy: &P,
) -> Weight {
    Simulator::from_fields(model, mu, v).likelihood_weight(path, policy)
}

/// Simulates `agents` agents along one shock path and compares their
/// empirical distribution with the solved one at every grid time.
pub fn empirical_aggregate<M: GameModel + ?Sized>(
    model: &M,
    sol: &EquilibriumSolution,
    agents: usize,
    shocks: &ShockPath,
    seed: u64,
) -> AggregateReport {
    let sim = Simulator::new(model, sol);
    let s = model.state_count();
    let grid = *sol.mu.grid();
    let n = grid.steps();
    let counts = (0..agents)
        .into_par_iter()
        .fold(
            || vec![0u64; (n + 1) * s],
            |mut acc, p| {
                let p = p as u64;
                let path = sim.sample_agent_path(shocks, &mut path_rng(seed, 2 * p + 1), false);
                let mut j = 0;
                for m in 0..=n {
                    let t = grid.node(m);
                    while j + 1 < path.jump_times.len() && path.jump_times[j + 1] <= t {
                        j += 1;
                    }
                    acc[m * s + path.states[j]] += 1;
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; (n + 1) * s],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let lattice = sol.lattice();
    let mut empirical = Vec::with_capacity(n + 1);
    let mut solved = Vec::with_capacity(n + 1);
    let (mut sup_tv, mut worst_index) = (0.0f64, 0);
    for m in 0..=n {
        let t = grid.node(m);
        let node = shocks.node_after(lattice, shocks.count_by(t));
        let start = lattice.node(node).start;
        let target = sol.mu.at(node, m.max(start)).to_vec();
        let emp: Vec<f64> = (0..s)
            .map(|i| counts[m * s + i] as f64 / agents.max(1) as f64)
            .collect();
        let tv = 0.5 * emp.iter().zip(&target).map(|(a, b)| (a - b).abs()).sum::<f64>();
        if tv > sup_tv {
            sup_tv = tv;
            worst_index = m;
        }
        empirical.push(emp);
        solved.push(target);
    }
    AggregateReport {
        agents,
        sup_tv,
        worst_index,
        empirical,
        solved,
    }
}

/// `P(Poisson(T) > n)`.
pub fn prob_more_shocks(horizon: f64, n: usize) -> f64 {
    let mut term = (-horizon).exp();
    let mut cdf = term;
    for k in 1..=n {
        term *= horizon / k as f64;
        cdf += term;
    }
    (1.0 - cdf).max(0.0)
}

/// `(1/T) E[int_0^T mu(t, U_t) dt]` over sampled shock paths.
pub fn time_average_shares<M: GameModel + ?Sized>(
    model: &M,
    sol: &EquilibriumSolution,
    paths: usize,
    seed: u64,
) -> SharesReport {
    let sim = Simulator::new(model, sol);
    let s = model.state_count();
    let grid = *sol.mu.grid();
    let horizon = grid.horizon();
    let per_path: Vec<Vec<f64>> = (0..paths)
        .into_par_iter()
        .map(|p| {
            let p = p as u64;
            let shocks = sim.sample_shock_path(&mut path_rng(seed, 2 * p));
            sim.integrated_shares(&shocks)
                .into_iter()
                .map(|x| x / horizon)
                .collect()
        })
        .collect();
    let mut shares = vec![0.0; s];
    let mut std_errors = vec![0.0; s];
    for i in 0..s {
        let col: Vec<f64> = per_path.iter().map(|r| r[i]).collect();
        let rep = McReport::from_samples(&col, seed);
        shares[i] = rep.estimate;
        std_errors[i] = rep.std_error;
    }
    let b = BoundsData::new(model.extrema(), Lipschitz::default());
    let n = sol.lattice().cap();
    SharesReport {
        shares,
        std_errors,
        paths,
        seed,
        prob_more_shocks: prob_more_shocks(horizon, n),
        value_gap_bound: bounds::value_gap_bound(&b, horizon, n),
    }
}
