//! File-based runs: solve, simulate, sweep and bounds.
//!
//! Field CSVs are in long format with columns
//! `node,shock_times,time_index,time,state,value`, where `node` joins the
//! shock grid indices with `;` (empty for the root) and `shock_times` holds
//! the matching times. Floats carry 17 significant digits.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::bounds::{self, BoundsData, ConstantsReport};
use crate::config::RunConfig;
use crate::equilibrium::{extract_policy, solve_equilibrium, system_residuals, EquilibriumSolution};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::forward::ForwardStats;
use crate::lattice::{Lattice, ShockVector};
use crate::model::{Extrema, GameModel, Model};
use crate::simulate::{self, path_rng, Simulator};

pub const FIELD_HEADER: [&str; 6] = ["node", "shock_times", "time_index", "time", "state", "value"];

fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

/// Hex SHA-256 of the effective configuration.
pub fn config_hash(cfg: &RunConfig) -> Result<String> {
    let text = serde_json::to_string(cfg)?;
    let digest = Sha256::digest(text.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn write_manifest(out: &Path, command: &str, cfg: &RunConfig, files: &[&str]) -> Result<()> {
    write_json(
        &out.join("manifest.json"),
        &json!({
            "command": command,
            "config_sha256": config_hash(cfg)?,
            "version": env!("CARGO_PKG_VERSION"),
            "seed": cfg.simulate.seed,
            "config": cfg,
            "files": files,
        }),
    )
}

/// Writes a field in long format, skipping groups above `max_level`.
pub fn write_field_csv(path: &Path, field: &Field, names: &[String], max_level: Option<usize>) -> Result<()> {
    let lattice = field.lattice();
    let grid = *lattice.grid();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(FIELD_HEADER)?;
    for (id, node) in lattice.nodes().iter().enumerate() {
        if max_level.is_some_and(|k| node.level > k) {
            break;
        }
        let key = node.u.key();
        let times = node
            .u
            .indices()
            .iter()
            .map(|&i| fmt_f(grid.node(i)))
            .collect::<Vec<_>>()
            .join(";");
        for m in node.start..=grid.steps() {
            let tm = fmt_f(grid.node(m));
            let ms = m.to_string();
            for (i, x) in field.at(id, m).iter().enumerate() {
                w.write_record([key.as_str(), times.as_str(), ms.as_str(), tm.as_str(), names[i].as_str(), &fmt_f(*x)])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a field written by [`write_field_csv`]; every point must be present.
pub fn read_field_csv(path: &Path, lattice: Arc<Lattice>, names: &[String]) -> Result<Field> {
    let s = names.len();
    let mut field = Field::zeros(lattice.clone(), s);
    let mut seen = vec![false; lattice.total_points() * s];
    let mut r = csv::Reader::from_path(path)?;
    let cap = lattice.cap();
    let bad = |msg: String| Error::Config(format!("{}: {msg}", path.display()));
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != FIELD_HEADER.len() {
            return Err(bad(format!("expected {} columns", FIELD_HEADER.len())));
        }
        let idx: Vec<usize> = if rec[0].is_empty() {
            vec![]
        } else {
            rec[0]
                .split(';')
                .map(|x| x.parse().map_err(|_| bad(format!("bad node key '{}'", &rec[0]))))
                .collect::<Result<_>>()?
        };
        let u = ShockVector::from_indices(cap, &idx).map_err(|e| bad(e.to_string()))?;
        let id = lattice
            .node_of(&u)
            .ok_or_else(|| bad(format!("node '{}' not on the lattice", &rec[0])))?;
        let m: usize = rec[2].parse().map_err(|_| bad("bad time index".into()))?;
        let state = names
            .iter()
            .position(|n| n == &rec[4])
            .ok_or_else(|| bad(format!("unknown state '{}'", &rec[4])))?;
        let value: f64 = rec[5].parse().map_err(|_| bad("bad value".into()))?;
        let node = lattice.node(id);
        if m < node.start || m > lattice.grid().steps() {
            return Err(bad(format!("time index {m} outside node '{}'", &rec[0])));
        }
        field.at_mut(id, m)[state] = value;
        let off = (id, m);
        let flat = field_offset(&lattice, off.0, off.1) * s + state;
        seen[flat] = true;
    }
    if seen.iter().any(|x| !x) {
        return Err(bad("field is incomplete (was it exported with output.max_level?)".into()));
    }
    Ok(field)
}

fn field_offset(lattice: &Lattice, id: usize, m: usize) -> usize {
    let node = lattice.node(id);
    node.point_offset + m - node.start
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub converged: bool,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub contraction_estimate: Option<f64>,
    pub tol: f64,
    pub damping: f64,
    pub damping_note: Option<String>,
    pub system_residuals: crate::equilibrium::SystemResiduals,
    pub mass_error: f64,
    pub min_mass: f64,
    pub clipped_points: usize,
    pub max_clip: f64,
    pub value_sup: f64,
    pub value_bound: f64,
    pub action_lo: f64,
    pub action_hi: f64,
    pub max_action: f64,
    pub action_bound_active: bool,
    pub lattice_level_sizes: Vec<usize>,
    pub lattice_points: usize,
    pub extrema: Extrema,
}

/// Summary checks of a solution.
pub fn diagnostics(model: &Model, sol: &EquilibriumSolution, policy: &Field) -> Result<Diagnostics> {
    let s = model.state_count();
    let mut mass_error = 0.0f64;
    let mut min_mass = f64::INFINITY;
    for chunk in sol.mu.values().chunks_exact(s) {
        mass_error = mass_error.max((chunk.iter().sum::<f64>() - 1.0).abs());
        min_mass = min_mass.min(chunk.iter().cloned().fold(f64::INFINITY, f64::min));
    }
    let ext = model.extrema();
    let b = BoundsData::new(ext, Default::default());
    let lattice = sol.lattice();
    let bx = model.action_box();
    let max_action = policy.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let ForwardStats { clipped, max_clip } = sol.forward_stats;
    Ok(Diagnostics {
        converged: sol.converged,
        iterations: sol.iterations,
        residual_history: sol.residual_history.clone(),
        contraction_estimate: sol.contraction_estimate,
        tol: sol.tol,
        damping: sol.damping,
        damping_note: (sol.damping < 1.0).then(|| {
            "damped iteration: convergence is observed, not covered by the small-horizon contraction result"
                .to_string()
        }),
        system_residuals: system_residuals(model, &sol.mu, &sol.v)?,
        mass_error,
        min_mass,
        clipped_points: clipped,
        max_clip,
        value_sup: sol.v.sup_norm(),
        value_bound: bounds::v_max(&b, lattice.grid().horizon(), lattice.cap()),
        action_lo: bx.lo,
        action_hi: bx.hi,
        max_action,
        action_bound_active: max_action >= bx.hi,
        lattice_level_sizes: lattice.level_sizes(),
        lattice_points: lattice.total_points(),
        extrema: ext,
    })
}

pub struct SolveOutcome {
    pub model: Model,
    pub solution: EquilibriumSolution,
    pub diagnostics: Diagnostics,
}

fn prepare_out(out: &Path) -> Result<PathBuf> {
    fs::create_dir_all(out)?;
    Ok(out.to_path_buf())
}

/// Solves the equilibrium and writes `mu.csv`, `v.csv`, `policy.csv`,
/// `diagnostics.json` and `manifest.json`.
pub fn run_solve(cfg: &RunConfig, out: &Path) -> Result<SolveOutcome> {
    let out = prepare_out(out)?;
    let model = cfg.build_model()?;
    let sol = solve_equilibrium(&model, cfg.time_grid()?, &cfg.solver_options())?;
    let policy = extract_policy(&sol, &model)?;
    let names = model.state_names();
    let lvl = cfg.output.max_level;
    write_field_csv(&out.join("mu.csv"), &sol.mu, &names, lvl)?;
    write_field_csv(&out.join("v.csv"), &sol.v, &names, lvl)?;
    write_field_csv(&out.join("policy.csv"), &policy, &names, lvl)?;
    let diag = diagnostics(&model, &sol, &policy)?;
    write_json(&out.join("diagnostics.json"), &diag)?;
    write_manifest(
        &out,
        "solve",
        cfg,
        &["mu.csv", "v.csv", "policy.csv", "diagnostics.json"],
    )?;
    Ok(SolveOutcome {
        model,
        solution: sol,
        diagnostics: diag,
    })
}

/// Loads `mu.csv` and `v.csv` from an earlier solve of the same config.
pub fn load_solution(cfg: &RunConfig, dir: &Path) -> Result<(Model, EquilibriumSolution)> {
    let model = cfg.build_model()?;
    let mu_path = dir.join("mu.csv");
    let v_path = dir.join("v.csv");
    for p in [&mu_path, &v_path] {
        if !p.exists() {
            return Err(Error::Config(format!("missing solution file {}", p.display())));
        }
    }
    let lattice = Arc::new(Lattice::with_budget(
        cfg.time_grid()?,
        model.shock_cap(),
        cfg.solver.point_budget,
    )?);
    let names = model.state_names();
    let mu = read_field_csv(&mu_path, lattice.clone(), &names)?;
    let v = read_field_csv(&v_path, lattice, &names)?;
    let sol = EquilibriumSolution {
        mu,
        v,
        residual_history: vec![],
        iterations: 0,
        contraction_estimate: None,
        converged: true,
        damping: cfg.solver.damping,
        tol: cfg.solver.tol,
        forward_stats: ForwardStats::default(),
    };
    Ok((model, sol))
}

#[derive(Debug, Clone, Serialize)]
pub struct ValueCheck {
    pub mc: simulate::McReport,
    pub ode: f64,
    /// `|mc - ode| / std_error`.
    pub z: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AggregateSummary {
    pub agents: usize,
    pub sup_tv: f64,
    pub threshold: f64,
    pub worst_index: usize,
    pub shock_times: Vec<f64>,
    pub shock_indices: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct McSummary {
    pub value_check: ValueCheck,
    pub aggregate: AggregateSummary,
    pub shares: simulate::SharesReport,
    pub state_names: Vec<String>,
    pub solution_converged: bool,
}

/// Runs the Monte-Carlo checks and writes `paths.csv`,
/// `aggregate_paths.csv`, `mc_report.json` and `manifest.json`.
pub fn run_simulate(cfg: &RunConfig, out: &Path) -> Result<McSummary> {
    let (model, sol) = match &cfg.simulate.solution {
        Some(dir) => load_solution(cfg, Path::new(dir))?,
        None => {
            let model = cfg.build_model()?;
            let sol = solve_equilibrium(&model, cfg.time_grid()?, &cfg.solver_options())?;
            (model, sol)
        }
    };
    let out = prepare_out(out)?;
    let seed = cfg.simulate.seed;
    let names = model.state_names();
    let sim = Simulator::new(&model, &sol);

    let mut w = csv::Writer::from_path(out.join("paths.csv"))?;
    w.write_record(["path", "event", "time", "state", "shocks"])?;
    for p in 0..cfg.simulate.sample_paths as u64 {
        let shocks = sim.sample_shock_path(&mut path_rng(seed, 2 * p));
        let agent = sim.sample_agent_path(&shocks, &mut path_rng(seed, 2 * p + 1), true);
        let ps = p.to_string();
        let mut events: Vec<(f64, &str, usize)> = agent
            .jump_times
            .iter()
            .zip(&agent.states)
            .enumerate()
            .map(|(j, (&t, &x))| (t, if j == 0 { "start" } else { "jump" }, x))
            .collect();
        for &t in &shocks.times {
            events.push((t, "shock", agent.state_at(t)));
        }
        let horizon = sol.mu.grid().horizon();
        events.push((horizon, "end", agent.state_at(horizon)));
        events.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (t, kind, x) in events {
            let z = shocks.count_by(t);
            w.write_record([ps.as_str(), kind, &fmt_f(t), names[x].as_str(), &z.to_string()])?;
        }
    }
    w.flush()?;

    let ode = sol.initial_value(model.initial_distribution());
    let mc = simulate::mc_value(&model, &sol, cfg.simulate.paths, seed);
    let z = if mc.std_error > 0.0 {
        (mc.estimate - ode).abs() / mc.std_error
    } else if mc.estimate == ode {
        0.0
    } else {
        f64::INFINITY
    };

    let agg_seed = seed.wrapping_add(1);
    let shocks = sim.sample_shock_path(&mut path_rng(agg_seed, 0));
    let agg = simulate::empirical_aggregate(&model, &sol, cfg.simulate.agents, &shocks, agg_seed);
    let grid = *sol.mu.grid();
    let mut w = csv::Writer::from_path(out.join("aggregate_paths.csv"))?;
    w.write_record(["time_index", "time", "state", "empirical", "solved"])?;
    for m in 0..=grid.steps() {
        for i in 0..names.len() {
            w.write_record([
                &m.to_string(),
                &fmt_f(grid.node(m)),
                names[i].as_str(),
                &fmt_f(agg.empirical[m][i]),
                &fmt_f(agg.solved[m][i]),
            ])?;
        }
    }
    w.flush()?;

    let shares = simulate::time_average_shares(&model, &sol, cfg.simulate.paths, seed);
    let summary = McSummary {
        value_check: ValueCheck { mc, ode, z },
        aggregate: AggregateSummary {
            agents: agg.agents,
            sup_tv: agg.sup_tv,
            threshold: 5.0 / (agg.agents as f64).sqrt(),
            worst_index: agg.worst_index,
            shock_times: shocks.times.clone(),
            shock_indices: shocks.indices.clone(),
        },
        shares,
        state_names: names,
        solution_converged: sol.converged,
    };
    write_json(&out.join("mc_report.json"), &summary)?;
    write_manifest(
        &out,
        "simulate",
        cfg,
        &["paths.csv", "aggregate_paths.csv", "mc_report.json"],
    )?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub shares: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
}

/// Solves once per sweep value and writes `sweep.csv`. Every value uses the
/// same seed, so differences between rows are not blurred by independent
/// sampling noise.
pub fn run_sweep(cfg: &RunConfig, out: &Path) -> Result<Vec<SweepRow>> {
    let out = prepare_out(out)?;
    let param = cfg.sweep.parameter.clone();
    if cfg.sweep.values.is_empty() {
        return Err(Error::Config("sweep.values is empty".into()));
    }
    let names = cfg.build_model()?.state_names();
    let mut rows = Vec::new();
    for &value in &cfg.sweep.values {
        let c = cfg.with_model_param(&param, value)?;
        let model = c.build_model()?;
        let sol = solve_equilibrium(&model, c.time_grid()?, &c.solver_options())?;
        let sh = simulate::time_average_shares(&model, &sol, cfg.sweep.paths, cfg.simulate.seed);
        rows.push(SweepRow {
            value,
            shares: sh.shares,
            std_errors: sh.std_errors,
            converged: sol.converged,
            iterations: sol.iterations,
            residual: sol.final_residual(),
        });
    }
    let mut w = csv::Writer::from_path(out.join("sweep.csv"))?;
    let mut header = vec!["parameter".to_string(), "value".to_string()];
    header.extend(names.iter().map(|n| format!("share_{n}")));
    header.extend(names.iter().map(|n| format!("stderr_{n}")));
    header.extend(["converged", "iterations", "residual"].map(String::from));
    w.write_record(&header)?;
    for r in &rows {
        let mut rec = vec![param.clone(), fmt_f(r.value)];
        rec.extend(r.shares.iter().map(|x| fmt_f(*x)));
        rec.extend(r.std_errors.iter().map(|x| fmt_f(*x)));
        rec.push(r.converged.to_string());
        rec.push(r.iterations.to_string());
        rec.push(fmt_f(r.residual));
        w.write_record(&rec)?;
    }
    w.flush()?;
    write_manifest(&out, "sweep", cfg, &["sweep.csv"])?;
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsOutput {
    pub data: BoundsData,
    pub action_lo: f64,
    pub action_hi: f64,
    pub report: ConstantsReport,
}

/// Bounds data for a config: model suprema with any overrides applied.
pub fn bounds_data(cfg: &RunConfig) -> Result<BoundsData> {
    let lip = cfg
        .bounds
        .lipschitz
        .ok_or_else(|| Error::Config("bounds.lipschitz must be given".into()))?;
    let model = cfg.build_model()?;
    let mut e = model.extrema();
    let o = &cfg.bounds.overrides;
    e.q_max = o.q_max.unwrap_or(e.q_max);
    e.psi_max = o.psi_max.unwrap_or(e.psi_max);
    e.terminal_max = o.terminal_max.unwrap_or(e.terminal_max);
    e.lambda_max = o.lambda_max.unwrap_or(e.lambda_max);
    e.j_max = o.j_max.unwrap_or(e.j_max);
    let b = BoundsData::new(e, lip);
    b.validate().map_err(Error::Config)?;
    Ok(b)
}

/// Writes `bounds.json` and `manifest.json`.
pub fn run_bounds(cfg: &RunConfig, out: &Path) -> Result<BoundsOutput> {
    let b = bounds_data(cfg)?;
    let out = prepare_out(out)?;
    let model = cfg.build_model()?;
    let bx = model.action_box();
    let report = bounds::compute_constants(&b, cfg.grid.horizon, model.shock_cap());
    let result = BoundsOutput {
        data: b,
        action_lo: bx.lo,
        action_hi: bx.hi,
        report,
    };
    write_json(&out.join("bounds.json"), &result)?;
    write_manifest(&out, "bounds", cfg, &["bounds.json"])?;
    Ok(result)
}
