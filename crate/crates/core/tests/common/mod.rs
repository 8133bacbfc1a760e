#![allow(dead_code)]

use shockmfg::{CorruptionModel, CorruptionParams, Model, TableModel, TableParams};

pub fn corruption() -> Model {
    CorruptionModel::default().into()
}

pub fn corruption_with(f: impl FnOnce(&mut CorruptionParams)) -> Model {
    let mut p = CorruptionParams::default();
    f(&mut p);
    CorruptionModel::new(p).unwrap().into()
}

/// Q = 0, lambda = 0, psi = c, Psi = 0.
pub fn decoupled(c: f64, shocks: usize) -> Model {
    let mut p = TableParams::blank(2, vec![0.5, 0.5]);
    p.shocks = shocks;
    p.reward = vec![c, c];
    p.lambda = vec![0.0];
    TableModel::new(p).unwrap().into()
}

/// Two states with rates and rewards linear in the distribution and a
/// quadratic control cost; smooth in every argument.
pub fn linear_two_state(shocks: usize, lambda: f64) -> Model {
    let mut p = TableParams::blank(2, vec![0.7, 0.3]);
    p.shocks = shocks;
    p.base = vec![vec![0.0, 0.4], vec![0.6, 0.0]];
    p.control = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
    p.coupling = vec![
        vec![vec![0.0, 0.0], vec![0.0, 0.8]],
        vec![vec![0.5, 0.0], vec![0.0, 0.0]],
    ];
    p.reward = vec![2.0, 1.0];
    p.reward_coupling = vec![vec![-1.5, 0.0], vec![0.0, -0.5]];
    p.cost = vec![0.5, 0.5];
    p.terminal = vec![0.5, 0.0];
    p.lambda = vec![lambda];
    p.relocation = vec![1, 1];
    p.action_hi = 5.0;
    TableModel::new(p).unwrap().into()
}

/// Small model for the measure-change check: S = 2, one shock.
pub fn importance_model() -> Model {
    let mut p = TableParams::blank(2, vec![0.6, 0.4]);
    p.shocks = 1;
    p.base = vec![vec![0.0, 0.5], vec![1.0, 0.0]];
    p.control = vec![vec![0.0, 1.0], vec![0.0, 0.0]];
    p.coupling = vec![
        vec![vec![0.0, 0.0], vec![0.0, 1.0]],
        vec![vec![0.5, 0.0], vec![0.0, 0.0]],
    ];
    p.reward = vec![1.0, 3.0];
    p.reward_coupling = vec![vec![0.0, -1.0], vec![0.0, 0.0]];
    p.cost = vec![0.5, 0.0];
    p.terminal = vec![0.0, 1.0];
    p.lambda = vec![1.5];
    p.relocation = vec![1, 1];
    p.action_hi = 3.0;
    TableModel::new(p).unwrap().into()
}
