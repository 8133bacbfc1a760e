//! Corruption detection with audits as common shocks.
//!
//! States are corrupt (C), honest (H) and revealed (R). Agents choose how
//! hard to push towards the other of C/H; peer pressure pulls corrupt agents
//! into R, audits move every corrupt agent to R at once.

use serde::{Deserialize, Serialize};

use super::{check_simplex, ActionBox, Extrema, GameModel, ModelError};

pub const C: usize = 0;
pub const H: usize = 1;
pub const R: usize = 2;

const RELOCATION: [usize; 3] = [R, H, R];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorruptionParams {
    /// Maximal number of audits.
    pub shocks: usize,
    /// Audit intensity.
    pub lambda: f64,
    pub q_inf: f64,
    pub q_soc: f64,
    pub q_rec: f64,
    /// Running rewards `(r^C, r^H, r^R)`.
    pub rewards: [f64; 3],
    /// Coefficient `c` of the effort cost `c a^2`.
    pub cost: f64,
    pub m0: [f64; 3],
    pub action_lo: f64,
    pub action_hi: f64,
    pub action_grid: usize,
}

impl Default for CorruptionParams {
    fn default() -> Self {
        Self {
            shocks: 2,
            lambda: 2.0,
            q_inf: 5.0,
            q_soc: 2.0,
            q_rec: 0.5,
            rewards: [10.0, 5.0, 0.0],
            cost: 0.5,
            m0: [0.2, 0.8, 0.0],
            action_lo: 0.0,
            action_hi: 20.0,
            action_grid: 401,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CorruptionModel {
    p: CorruptionParams,
}

impl CorruptionModel {
    pub fn new(p: CorruptionParams) -> Result<Self, ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidParams(msg));
        for (name, x) in [
            ("lambda", p.lambda),
            ("q_inf", p.q_inf),
            ("q_soc", p.q_soc),
            ("q_rec", p.q_rec),
        ] {
            if !(x.is_finite() && x >= 0.0) {
                return bad(format!("{name} must be finite and >= 0, got {x}"));
            }
        }
        let [rc, rh, rr] = p.rewards;
        if !(rc >= rh && rh >= rr && rr >= 0.0 && rc.is_finite()) {
            return bad(format!("rewards must satisfy r_C >= r_H >= r_R >= 0, got {:?}", p.rewards));
        }
        if !(p.cost.is_finite() && p.cost >= 0.0) {
            return bad(format!("cost must be finite and >= 0, got {}", p.cost));
        }
        if p.action_lo < 0.0 {
            return bad(format!("action_lo must be >= 0, got {}", p.action_lo));
        }
        let bx = ActionBox {
            lo: p.action_lo,
            hi: p.action_hi,
            grid_points: p.action_grid,
        };
        bx.validate()?;
        check_simplex(&p.m0, "m0")?;
        Ok(Self { p })
    }

    pub fn params(&self) -> &CorruptionParams {
        &self.p
    }

    fn best_effort(&self, gain: f64) -> f64 {
        let (lo, hi) = (self.p.action_lo, self.p.action_hi);
        if self.p.cost > 0.0 {
            (gain / (2.0 * self.p.cost)).clamp(lo, hi)
        } else if gain > 0.0 {
            hi
        } else {
            lo
        }
    }
}

impl Default for CorruptionModel {
    fn default() -> Self {
        Self::new(CorruptionParams::default()).expect("default parameters are valid")
    }
}

impl GameModel for CorruptionModel {
    fn state_count(&self) -> usize {
        3
    }

    fn shock_cap(&self) -> usize {
        self.p.shocks
    }

    fn initial_distribution(&self) -> &[f64] {
        &self.p.m0
    }

    fn action_box(&self) -> ActionBox {
        ActionBox {
            lo: self.p.action_lo,
            hi: self.p.action_hi,
            grid_points: self.p.action_grid,
        }
    }

    fn state_names(&self) -> Vec<String> {
        vec!["C".into(), "H".into(), "R".into()]
    }

    #[inline]
    fn generator_row(&self, _t: f64, _k: usize, m: &[f64], i: usize, a: f64, row: &mut [f64]) {
        match i {
            C => {
                let soc = self.p.q_soc * (m[H] + m[R]);
                row[C] = -soc - a;
                row[H] = a;
                row[R] = soc;
            }
            H => {
                let back = a + self.p.q_inf * m[C];
                row[C] = back;
                row[H] = -back;
                row[R] = 0.0;
            }
            _ => {
                row[C] = 0.0;
                row[H] = self.p.q_rec;
                row[R] = -self.p.q_rec;
            }
        }
    }

    #[inline]
    fn running_reward(&self, _t: f64, _k: usize, _m: &[f64], i: usize, a: f64) -> f64 {
        match i {
            R => self.p.rewards[R],
            _ => self.p.rewards[i] - self.p.cost * a * a,
        }
    }

    fn terminal_reward(&self, _k: usize, _m: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
    }

    #[inline]
    fn shock_intensity(&self, _k: usize, _t: f64, _m: &[f64]) -> f64 {
        self.p.lambda
    }

    #[inline]
    fn relocate_state(&self, _t: f64, i: usize) -> usize {
        RELOCATION[i]
    }

    #[inline]
    fn closed_form_action(&self, _t: f64, _k: usize, _m: &[f64], v: &[f64], i: usize) -> Option<f64> {
        Some(match i {
            C => self.best_effort(v[H] - v[C]),
            H => self.best_effort(v[C] - v[H]),
            _ => self.p.action_lo,
        })
    }

    fn extrema(&self) -> Extrema {
        let p = &self.p;
        let hi = p.action_hi;
        let q_max = (2.0 * (p.q_soc + hi))
            .max(2.0 * (hi + p.q_inf))
            .max(2.0 * p.q_rec);
        let cost_range = [p.cost * p.action_lo * p.action_lo, p.cost * hi * hi];
        let mut psi_max = p.rewards[R].abs();
        for r in [p.rewards[C], p.rewards[H]] {
            for c in cost_range {
                psi_max = psi_max.max((r - c).abs());
            }
        }
        Extrema {
            q_max,
            psi_max,
            terminal_max: 0.0,
            lambda_max: p.lambda,
            j_max: 2.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_entries() {
        let m = CorruptionModel::default();
        let mut row = [0.0; 3];
        let dist = [0.2, 0.8, 0.0];
        m.generator_row(0.0, 0, &dist, C, 3.0, &mut row);
        assert_eq!(row[H], 3.0);
        m.generator_row(0.0, 0, &dist, H, 1.0, &mut row);
        assert!((row[C] - 2.0).abs() < 1e-15);
        for i in 0..3 {
            m.generator_row(0.0, 0, &dist, i, 1.0, &mut row);
            assert!(row.iter().sum::<f64>().abs() < 1e-15);
        }
    }

    #[test]
    fn honest_effort_example() {
        let m = CorruptionModel::default();
        let mut row = [0.0; 3];
        let v = [10.0, 5.0, 0.0];
        let (a, _) = m.hamiltonian_max(0.0, 0, &[0.2, 0.8, 0.0], &v, H, &mut row).unwrap();
        assert_eq!(a, 5.0);
        let grid = super::super::grid_argmax(&m, 0.0, 0, &[0.2, 0.8, 0.0], &v, H, &mut row).unwrap();
        assert!((grid - 5.0).abs() <= 20.0 / 400.0);
    }

    #[test]
    fn rejects_negative_rates() {
        let p = CorruptionParams {
            q_inf: -1.0,
            ..Default::default()
        };
        assert!(CorruptionModel::new(p).is_err());
    }

    #[test]
    fn table_extrema() {
        let e = CorruptionModel::default().extrema();
        assert_eq!(e.q_max, 50.0);
        assert_eq!(e.psi_max, 195.0);
        assert_eq!(e.lambda_max, 2.0);
    }
}
