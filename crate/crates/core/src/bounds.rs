//! A priori constants, the small-horizon contraction test and the
//! approximation error of truncating the number of shocks.

use serde::{Deserialize, Serialize};

use crate::model::Extrema;

/// Lipschitz constants of the reduced coefficients; supplied by the user.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lipschitz {
    /// Of the reduced running reward.
    pub psi: f64,
    /// Of the reduced generator.
    pub q: f64,
    /// Of the terminal reward in `m`.
    pub terminal: f64,
    /// Of the shock intensities in `m`.
    pub lambda: f64,
}

/// Coefficient suprema together with Lipschitz constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsData {
    pub q_max: f64,
    pub psi_max: f64,
    pub terminal_max: f64,
    pub lambda_max: f64,
    pub j_max: f64,
    pub lipschitz: Lipschitz,
}

impl BoundsData {
    pub fn new(e: Extrema, lipschitz: Lipschitz) -> Self {
        Self {
            q_max: e.q_max,
            psi_max: e.psi_max,
            terminal_max: e.terminal_max,
            lambda_max: e.lambda_max,
            j_max: e.j_max,
            lipschitz,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let l = &self.lipschitz;
        let all = [
            ("q_max", self.q_max),
            ("psi_max", self.psi_max),
            ("terminal_max", self.terminal_max),
            ("lambda_max", self.lambda_max),
            ("j_max", self.j_max),
            ("lipschitz.psi", l.psi),
            ("lipschitz.q", l.q),
            ("lipschitz.terminal", l.terminal),
            ("lipschitz.lambda", l.lambda),
        ];
        for (name, x) in all {
            if !(x.is_finite() && x >= 0.0) {
                return Err(format!("{name} must be finite and >= 0, got {x}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonRow {
    pub n: usize,
    pub epsilon: f64,
    /// `epsilon_n / epsilon_{n-1}`; absent for the first row.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsReport {
    pub horizon: f64,
    pub shocks: usize,
    pub v_max: f64,
    pub k1: f64,
    pub k2: f64,
    pub contraction_value: f64,
    pub contraction_ok: bool,
    /// Set when an exponential overflowed and a value became infinite.
    pub overflow: bool,
    pub epsilon: Vec<EpsilonRow>,
}

fn geometric_sum(x: f64, n: usize) -> f64 {
    (0..=n).map(|i| x.powi(i as i32)).sum()
}

/// Uniform bound on the value function of the `n`-shock game.
pub fn v_max(b: &BoundsData, horizon: f64, n: usize) -> f64 {
    let e = ((b.q_max + b.lambda_max) * horizon).exp();
    (b.terminal_max + b.psi_max * horizon) * e * geometric_sum(e * b.lambda_max * horizon, n)
}

pub fn k1(b: &BoundsData, v_max: f64) -> f64 {
    let l = &b.lipschitz;
    l.psi + l.q * v_max + 2.0 * v_max * l.lambda
}

pub fn k2(b: &BoundsData, v_max: f64) -> f64 {
    b.lipschitz.psi + v_max * b.lipschitz.q + b.q_max + b.lambda_max
}

/// Left-hand side of the small-horizon contraction condition, split into
/// its distribution and value factors.
pub fn contraction_factors(b: &BoundsData, horizon: f64, n: usize) -> (f64, f64) {
    let l = &b.lipschitz;
    let vm = v_max(b, horizon, n);
    let (c1, c2) = (k1(b, vm), k2(b, vm));
    let eq = ((b.q_max + l.q) * horizon).exp();
    let mu_factor = l.q
        * horizon
        * (0..=n)
            .map(|i| eq.powi(i as i32 + 1) * b.j_max.powi(i as i32))
            .sum::<f64>();
    let ek = (c2 * horizon).exp();
    let v_factor = (l.terminal + c1 * horizon) * ek * geometric_sum(ek * b.lambda_max * horizon, n);
    (mu_factor, v_factor)
}

/// Returns the contraction value and whether it is below one.
pub fn contraction_check(b: &BoundsData, horizon: f64, n: usize) -> (f64, bool) {
    let (a, c) = contraction_factors(b, horizon, n);
    // 0 * inf only happens when the horizon vanishes.
    let value = if a == 0.0 || c == 0.0 { 0.0 } else { a * c };
    (value, value < 1.0)
}

/// Per-shock decay factor `1 - exp(-max(lambda_max, 1) T)`.
pub fn shock_tail_factor(b: &BoundsData, horizon: f64) -> f64 {
    -(-b.lambda_max.max(1.0) * horizon).exp_m1()
}

/// Approximation error of the `n`-shock equilibrium in the unbounded game.
pub fn epsilon(b: &BoundsData, horizon: f64, n: usize) -> f64 {
    4.0 * (b.psi_max * horizon + b.terminal_max) * shock_tail_factor(b, horizon).powi(n as i32)
}

/// Bound on the value difference between the `n`-shock and unbounded games.
pub fn value_gap_bound(b: &BoundsData, horizon: f64, n: usize) -> f64 {
    2.0 * (b.psi_max * horizon + b.terminal_max) * shock_tail_factor(b, horizon).powi(n as i32)
}

pub fn epsilon_n(b: &BoundsData, horizon: f64, ns: &[usize]) -> Vec<EpsilonRow> {
    let mut prev: Option<(usize, f64)> = None;
    ns.iter()
        .map(|&n| {
            let eps = epsilon(b, horizon, n);
            let ratio = match prev {
                Some((pn, pe)) if pn + 1 == n && pe > 0.0 => Some(eps / pe),
                _ => None,
            };
            prev = Some((n, eps));
            EpsilonRow { n, epsilon: eps, ratio }
        })
        .collect()
}

pub fn compute_constants(b: &BoundsData, horizon: f64, n: usize) -> ConstantsReport {
    let vm = v_max(b, horizon, n);
    let (c1, c2) = (k1(b, vm), k2(b, vm));
    let (value, ok) = contraction_check(b, horizon, n);
    let ns: Vec<usize> = (0..=n).collect();
    let epsilon = epsilon_n(b, horizon, &ns);
    let overflow = [vm, c1, c2, value].iter().any(|x| !x.is_finite());
    ConstantsReport {
        horizon,
        shocks: n,
        v_max: vm,
        k1: c1,
        k2: c2,
        contraction_value: if value.is_nan() { f64::INFINITY } else { value },
        contraction_ok: ok && !overflow,
        overflow,
        epsilon,
    }
}
