mod common;

use std::sync::Arc;

use shockmfg::bounds::{self, BoundsData, Lipschitz};
use shockmfg::equilibrium::extract_policy;
use shockmfg::forward::solve_forward;
use shockmfg::{
    solve_backward, solve_equilibrium, EquilibriumSolution, Field, GameModel, InitialGuess,
    Lattice, Model, SolveError, SolverOptions, TableModel, TableParams, TimeGrid,
};

fn lattice(horizon: f64, steps: usize, cap: usize) -> Arc<Lattice> {
    Arc::new(Lattice::new(TimeGrid::new(horizon, steps).unwrap(), cap).unwrap())
}

fn solve(model: &Model, horizon: f64, steps: usize) -> EquilibriumSolution {
    let grid = TimeGrid::new(horizon, steps).unwrap();
    solve_equilibrium(model, grid, &SolverOptions::default())
        .unwrap()
        .ensure_converged()
        .unwrap()
}

fn mass_error(mu: &Field) -> f64 {
    mu.values()
        .chunks_exact(mu.states())
        .map(|c| (c.iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max)
}

#[test]
fn decoupled_value_is_linear_in_time() {
    for cap in [0, 2] {
        let model = common::decoupled(1.5, cap);
        let lat = lattice(2.0, 20, cap);
        let mu = Field::constant(lat.clone(), model.initial_distribution());
        let v = solve_backward(&model, &mu).unwrap();
        let grid = *lat.grid();
        for (id, node) in lat.nodes().iter().enumerate() {
            for m in node.start..=20 {
                let exact = 1.5 * (2.0 - grid.node(m));
                for x in v.at(id, m) {
                    assert!((x - exact).abs() <= 1e-12);
                }
            }
        }
    }
}

#[test]
fn terminal_condition_is_exact() {
    let model = common::linear_two_state(2, 1.0);
    let lat = lattice(1.0, 12, 2);
    let mu = Field::constant(lat.clone(), model.initial_distribution());
    let v = solve_backward(&model, &mu).unwrap();
    for id in 0..lat.nodes().len() {
        assert_eq!(v.at(id, 12), &[0.5, 0.0]);
    }
}

#[test]
fn without_shocks_nodes_of_a_group_agree() {
    let model = common::linear_two_state(2, 0.0);
    let lat = lattice(1.0, 16, 2);
    let mu = Field::constant(lat.clone(), model.initial_distribution());
    let v = solve_backward(&model, &mu).unwrap();
    let root = lat.root();
    for (id, node) in lat.nodes().iter().enumerate() {
        for m in node.start..=16 {
            for (a, b) in v.at(id, m).iter().zip(v.at(root, m)) {
                assert!((a - b).abs() <= 1e-10);
            }
        }
    }
}

#[test]
fn terminal_shift_shifts_the_value() {
    let shifted = |c: f64| -> Model {
        let base = common::linear_two_state(2, 1.3);
        let Model::Table(t) = base else { unreachable!() };
        let mut p: TableParams = t.params().clone();
        p.terminal = p.terminal.iter().map(|x| x + c).collect();
        TableModel::new(p).unwrap().into()
    };
    let lat = lattice(1.0, 16, 2);
    let a = shifted(0.0);
    let b = shifted(2.5);
    let mu = Field::constant(lat.clone(), a.initial_distribution());
    let va = solve_backward(&a, &mu).unwrap();
    let vb = solve_backward(&b, &mu).unwrap();
    for (x, y) in va.values().iter().zip(vb.values()) {
        assert!((y - x - 2.5).abs() <= 1e-10);
    }
}

#[test]
fn value_stays_below_the_a_priori_bound() {
    let model = common::corruption();
    let lat = lattice(2.0, 40, 2);
    let b = BoundsData::new(model.extrema(), Lipschitz::default());
    let bound = bounds::v_max(&b, 2.0, 2);
    for m in [[0.2, 0.8, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]] {
        let mu = Field::constant(lat.clone(), &m);
        let v = solve_backward(&model, &mu).unwrap();
        assert!(v.is_finite());
        assert!(v.sup_norm() <= bound);
        // Loose but model-specific: rewards are at most 10 per unit time.
        assert!(v.sup_norm() <= 20.0 + 1e-9);
    }
}

#[test]
fn shape_mismatch_is_reported() {
    let model = common::corruption();
    let lat = lattice(1.0, 10, 2);
    let mu = Field::constant(lat, &[0.5, 0.5]);
    assert!(matches!(solve_backward(&model, &mu), Err(SolveError::Mismatch(_))));
    let lat = lattice(1.0, 10, 1);
    let mu = Field::constant(lat, &[0.2, 0.8, 0.0]);
    assert!(solve_backward(&model, &mu).is_err());
}

#[test]
fn zero_generator_keeps_the_initial_distribution() {
    let model = common::decoupled(1.0, 1);
    let lat = lattice(1.0, 10, 1);
    let v = Field::zeros(lat, 2);
    let mu = solve_forward(&model, &v).unwrap();
    for c in mu.values().chunks_exact(2) {
        assert!((c[0] - 0.5).abs() <= 1e-14 && (c[1] - 0.5).abs() <= 1e-14);
    }
}

#[test]
fn forward_solution_properties() {
    let model = common::corruption();
    let sol = solve(&model, 2.0, 40);
    let lat = sol.lattice();
    let grid = *lat.grid();
    assert_eq!(sol.mu.at(lat.root(), 0), &[0.2, 0.8, 0.0]);
    assert!(mass_error(&sol.mu) <= 1e-9);
    assert!(sol.mu.values().iter().all(|x| *x >= -1e-7));
    let q_max = model.extrema().q_max;
    for (id, node) in lat.nodes().iter().enumerate() {
        if node.level == 1 {
            assert_eq!(sol.mu.at(id, node.start)[0], 0.0);
        }
        for m in node.start..grid.steps() {
            let d: f64 = sol
                .mu
                .at(id, m)
                .iter()
                .zip(sol.mu.at(id, m + 1))
                .map(|(a, b)| (a - b).abs())
                .sum();
            assert!(d <= q_max * grid.dt() * (1.0 + 1e-6));
        }
    }
}

/// Rates and rewards independent of the distribution.
fn uncoupled(shocks: usize, lambda: f64) -> Model {
    let mut p = TableParams::blank(2, vec![0.7, 0.3]);
    p.shocks = shocks;
    p.base = vec![vec![0.0, 0.4], vec![0.6, 0.0]];
    p.control = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
    p.reward = vec![2.0, 1.0];
    p.cost = vec![0.5, 0.5];
    p.lambda = vec![lambda];
    p.relocation = vec![1, 1];
    p.action_hi = 5.0;
    TableModel::new(p).unwrap().into()
}

#[test]
fn uncoupled_model_converges_after_two_iterations() {
    let model = uncoupled(1, 1.0);
    let sol = solve_equilibrium(&model, TimeGrid::new(1.0, 20).unwrap(), &SolverOptions::default()).unwrap();
    assert!(sol.converged);
    assert_eq!(sol.iterations, 2);
    assert!(sol.residual_history[0] > 0.0);
    assert!(sol.residual_history[1] <= 1e-15);
}

#[test]
fn fixed_point_is_invariant_and_damping_agrees() {
    let model = common::corruption();
    let grid = TimeGrid::new(2.0, 40).unwrap();
    let opts = SolverOptions::default();
    let sol = solve_equilibrium(&model, grid, &opts).unwrap();
    assert!(sol.converged);
    assert!(sol.residual_history.iter().all(|r| *r > 0.0));
    let v = solve_backward(&model, &sol.mu).unwrap();
    let again = solve_forward(&model, &v).unwrap();
    assert!(again.sup_distance(&sol.mu) <= 2.0 * opts.tol);

    let damped = solve_equilibrium(
        &model,
        grid,
        &SolverOptions {
            damping: 0.6,
            ..SolverOptions::default()
        },
    )
    .unwrap();
    assert!(damped.converged);
    assert!(damped.mu.sup_distance(&sol.mu) <= 10.0 * opts.tol);

    let warm = solve_equilibrium(
        &model,
        grid,
        &SolverOptions {
            initial: InitialGuess::Field(sol.mu.clone()),
            ..SolverOptions::default()
        },
    )
    .unwrap();
    assert!(warm.converged);
    assert_eq!(warm.iterations, 1);
}

#[test]
fn non_convergence_returns_data() {
    let model = common::corruption();
    let opts = SolverOptions {
        max_iters: 2,
        ..SolverOptions::default()
    };
    let sol = solve_equilibrium(&model, TimeGrid::new(2.0, 20).unwrap(), &opts).unwrap();
    assert!(!sol.converged);
    assert_eq!(sol.residual_history.len(), 2);
    assert!(sol.ensure_converged().is_err());
    assert!(SolverOptions { damping: 0.0, ..SolverOptions::default() }.validate().is_err());
    assert!(SolverOptions { tol: -1.0, ..SolverOptions::default() }.validate().is_err());
}

#[test]
fn policy_examples() {
    let model = common::corruption();
    let sol = solve(&model, 2.0, 40);
    let policy = extract_policy(&sol, &model).unwrap();
    let lat = sol.lattice();
    for (id, node) in lat.nodes().iter().enumerate() {
        for m in node.start..=40 {
            assert_eq!(policy.at(id, m)[2], 0.0);
        }
        assert_eq!(policy.at(id, 40), &[0.0, 0.0, 0.0]);
    }

    let model = uncoupled(2, 0.0);
    let sol = solve(&model, 1.0, 16);
    let policy = extract_policy(&sol, &model).unwrap();
    let lat = sol.lattice();
    for (id, node) in lat.nodes().iter().enumerate() {
        let first = lat.level(node.level).start;
        for m in node.start..=16 {
            for (a, b) in policy.at(id, m).iter().zip(policy.at(first, m)) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}

/// Successive differences of the initial value under grid halving.
fn halving_ratios(model: &Model, horizon: f64, steps: &[usize]) -> Vec<f64> {
    let vals: Vec<f64> = steps
        .iter()
        .map(|&n| solve(model, horizon, n).initial_value(model.initial_distribution()))
        .collect();
    let diffs: Vec<f64> = vals.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    diffs.windows(2).map(|d| d[0] / d[1]).collect()
}

#[test]
fn fourth_order_in_the_step() {
    for model in [common::linear_two_state(0, 0.0), common::linear_two_state(1, 1.0)] {
        let ratios = halving_ratios(&model, 1.0, &[10, 20, 40, 80]);
        for r in ratios {
            assert!(r >= 8.0, "halving ratio {r}");
        }
    }
}
