use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use shockmfg::cli;
use shockmfg::config::RunConfig;
use shockmfg::Error;

#[derive(Parser)]
#[command(name = "shockmfg", version, about = "Mean field games with common shocks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// JSON configuration file; defaults apply when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides output.dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Root seed (overrides simulate.seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; all cores when absent.
    #[arg(long)]
    workers: Option<usize>,
    /// Dotted config override, e.g. model.params.lambda=0.4. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the equilibrium and write the fields.
    Solve(Common),
    /// Monte-Carlo checks of a solution.
    Simulate(Common),
    /// Time-averaged shares over a range of one model parameter.
    Sweep(Common),
    /// A priori constants and truncation errors.
    Bounds(Common),
}

fn load(c: &Common) -> shockmfg::Result<(RunConfig, PathBuf)> {
    let text = match &c.config {
        Some(p) => Some(std::fs::read_to_string(p).map_err(|e| {
            Error::Config(format!("cannot read {}: {e}", p.display()))
        })?),
        None => None,
    };
    let mut overrides = c.overrides.clone();
    if let Some(seed) = c.seed {
        overrides.push(format!("simulate.seed={seed}"));
    }
    let cfg = RunConfig::load(text.as_deref(), &overrides)?;
    let out = c.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    Ok((cfg, out))
}

fn run(cmd: Command) -> shockmfg::Result<()> {
    let c = match &cmd {
        Command::Solve(c) | Command::Simulate(c) | Command::Sweep(c) | Command::Bounds(c) => c,
    };
    if let Some(w) = c.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot start {w} workers: {e}")))?;
    }
    let (cfg, out) = load(c)?;
    match cmd {
        Command::Solve(_) => {
            let r = cli::run_solve(&cfg, &out)?;
            let d = &r.diagnostics;
            eprintln!(
                "converged={} iterations={} residual={:.3e} value={:.10}",
                d.converged,
                d.iterations,
                r.solution.final_residual(),
                r.solution.initial_value(shockmfg::GameModel::initial_distribution(&r.model)),
            );
            r.solution.ensure_converged()?;
        }
        Command::Simulate(_) => {
            let r = cli::run_simulate(&cfg, &out)?;
            eprintln!(
                "mc={:.6} +- {:.6} ode={:.6} z={:.2} sup_tv={:.4} (threshold {:.4})",
                r.value_check.mc.estimate,
                r.value_check.mc.std_error,
                r.value_check.ode,
                r.value_check.z,
                r.aggregate.sup_tv,
                r.aggregate.threshold
            );
            if !r.solution_converged {
                return Err(Error::NotConverged {
                    iterations: 0,
                    residual: f64::NAN,
                });
            }
        }
        Command::Sweep(_) => {
            let rows = cli::run_sweep(&cfg, &out)?;
            for r in &rows {
                eprintln!("{} = {}: shares {:?}", cfg.sweep.parameter, r.value, r.shares);
            }
            if let Some(r) = rows.iter().find(|r| !r.converged) {
                return Err(Error::NotConverged {
                    iterations: r.iterations,
                    residual: r.residual,
                });
            }
        }
        Command::Bounds(_) => {
            let r = cli::run_bounds(&cfg, &out)?;
            eprintln!(
                "contraction value {:.6e} ({})",
                r.report.contraction_value,
                if r.report.contraction_ok { "< 1" } else { ">= 1" }
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = match Cli::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(args.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::NotConverged { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
