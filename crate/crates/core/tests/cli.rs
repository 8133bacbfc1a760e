use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::Value;
use shockmfg::cli::{read_field_csv, run_solve, run_sweep};
use shockmfg::config::RunConfig;
use shockmfg::simulate::time_average_shares;
use shockmfg::{GameModel, Lattice};

const BIN: &str = env!("CARGO_BIN_EXE_shockmfg");

fn run(args: &[&str]) -> (i32, String) {
    let out = Command::new(BIN).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn small(dir: &Path, extra: &str) -> String {
    let path = dir.join("config.json");
    let text = format!(
        r#"{{"model": {{"name": "corruption"}}, "grid": {{"steps": 30}},
            "simulate": {{"paths": 3000, "agents": 500, "sample_paths": 5}}{extra}}}"#
    );
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn solve_writes_fields_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path(), "");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let (code, err) = run(&["solve", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(code, 0, "{err}");
    }
    for f in ["mu.csv", "v.csv", "policy.csv", "diagnostics.json", "manifest.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }

    let mut rdr = csv::Reader::from_path(a.join("mu.csv")).unwrap();
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>(),
        ["node", "shock_times", "time_index", "time", "state", "value"]
    );
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    let first: Vec<f64> = rows[..3].iter().map(|r| r[5].parse().unwrap()).collect();
    assert_eq!(&rows[0][0], "");
    assert_eq!(&rows[0][2], "0");
    assert_eq!(first, [0.2, 0.8, 0.0]);

    let mut rdr = csv::Reader::from_path(a.join("v.csv")).unwrap();
    for r in rdr.records().map(Result::unwrap) {
        if &r[2] == "30" {
            assert_eq!(r[5].parse::<f64>().unwrap(), 0.0);
        }
    }

    let d = json(&a.join("diagnostics.json"));
    assert_eq!(d["converged"], true);
    assert!(d["residual_history"].as_array().unwrap().len() >= 2);
    assert!(d["contraction_estimate"].as_f64().unwrap() < 1.0);
    assert_eq!(d["action_bound_active"], false);
    let m = json(&a.join("manifest.json"));
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn fields_roundtrip_through_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::load(None, &["grid.steps=12".into()]).unwrap();
    let out = run_solve(&cfg, dir.path()).unwrap();
    let lat = out.solution.lattice().clone();
    let names = out.model.state_names();
    let mu = read_field_csv(&dir.path().join("mu.csv"), lat.clone(), &names).unwrap();
    assert_eq!(mu.values(), out.solution.mu.values());
    let v = read_field_csv(&dir.path().join("v.csv"), lat, &names).unwrap();
    assert_eq!(v.values(), out.solution.v.values());

    // Truncated exports cannot be read back as a full field.
    let cut = dir.path().join("cut");
    let mut c2 = cfg.clone();
    c2.output.max_level = Some(1);
    run_solve(&c2, &cut).unwrap();
    let lat = std::sync::Arc::new(Lattice::new(cfg.time_grid().unwrap(), 2).unwrap());
    assert!(read_field_csv(&cut.join("mu.csv"), lat, &names).is_err());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = out.to_str().unwrap();
    assert_eq!(run(&["--help"]).0, 0);
    assert_eq!(run(&["frobnicate"]).0, 1);
    assert_eq!(run(&["solve", "--config", "/no/such/file.json", "--out", o]).0, 1);

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"grid": {"stepz": 10}}"#).unwrap();
    let (code, err) = run(&["solve", "--config", bad.to_str().unwrap(), "--out", o]);
    assert_eq!(code, 1);
    assert!(err.contains("stepz"), "{err}");
    fs::write(&bad, "{not json").unwrap();
    assert_eq!(run(&["solve", "--config", bad.to_str().unwrap(), "--out", o]).0, 1);
    assert_eq!(run(&["solve", "--out", o, "--override", "solver.damping=2"]).0, 1);

    let (code, _) = run(&[
        "solve", "--out", o, "--override", "grid.steps=20", "--override", "solver.max_iters=2",
    ]);
    assert_eq!(code, 2);
    assert_eq!(json(&out.join("diagnostics.json"))["converged"], false);
}

#[test]
fn simulate_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path(), "");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let (code, err) = run(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "5"]);
        assert_eq!(code, 0, "{err}");
    }
    assert_eq!(fs::read(a.join("paths.csv")).unwrap(), fs::read(b.join("paths.csv")).unwrap());
    let r = json(&a.join("mc_report.json"));
    let shares: f64 = r["shares"]["shares"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).sum();
    assert!((shares - 1.0).abs() <= 1e-9);
    assert!(r["value_check"]["z"].as_f64().unwrap() <= 3.0);
    assert_eq!(r["value_check"]["mc"]["seed"], 5);

    // Reuse a solve from disk.
    let solved = dir.path().join("solved");
    assert_eq!(run(&["solve", "--config", &cfg, "--out", solved.to_str().unwrap()]).0, 0);
    let c = dir.path().join("c");
    let arg = format!("simulate.solution={}", solved.to_str().unwrap());
    let (code, err) = run(&["simulate", "--config", &cfg, "--out", c.to_str().unwrap(), "--seed", "5", "--override", &arg]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(fs::read(a.join("paths.csv")).unwrap(), fs::read(c.join("paths.csv")).unwrap());

    let missing = format!("simulate.solution={}", dir.path().join("nothing").to_str().unwrap());
    assert_eq!(run(&["simulate", "--config", &cfg, "--out", c.to_str().unwrap(), "--override", &missing]).0, 1);
}

#[test]
fn single_value_sweep_matches_solve() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::load(
        None,
        &[
            "grid.steps=30".into(),
            "sweep.values=[1.0]".into(),
            "sweep.paths=2000".into(),
            "simulate.seed=8".into(),
        ],
    )
    .unwrap();
    let rows = run_sweep(&cfg, dir.path()).unwrap();
    let c = cfg.with_model_param("lambda", 1.0).unwrap();
    let solved = run_solve(&c, &dir.path().join("s")).unwrap();
    let rep = time_average_shares(&solved.model, &solved.solution, 2000, 8);
    assert_eq!(rows[0].shares, rep.shares);
    let text = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert!(text.starts_with("parameter,value,share_C,share_H,share_R,"));
    assert!(text.lines().nth(1).unwrap().starts_with("lambda,"));
}

#[test]
fn failed_sweep_rows_are_kept() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().to_str().unwrap();
    let (code, _) = run(&[
        "sweep", "--out", o, "--override", "grid.steps=20", "--override", "solver.max_iters=1",
        "--override", "sweep.values=[0.5,1.5]", "--override", "sweep.paths=100", "--workers", "1",
    ]);
    assert_eq!(code, 2);
    let text = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().skip(1).all(|l| l.contains(",false,")));
}

#[test]
fn bounds_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().to_str().unwrap();
    assert_eq!(run(&["bounds", "--out", o]).0, 1);
    let cfg = small(
        dir.path(),
        r#", "bounds": {"lipschitz": {"psi": 40, "q": 10, "terminal": 0, "lambda": 0}, "psi_max": 10}"#,
    );
    let (code, err) = run(&["bounds", "--config", &cfg, "--out", o]);
    assert_eq!(code, 0, "{err}");
    let b = json(&dir.path().join("bounds.json"));
    assert_eq!(b["action_hi"], 20.0);
    let rows = b["report"]["epsilon"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert!((rows[2]["epsilon"].as_f64().unwrap() - 77.096).abs() < 5e-4);
    let f = 1.0 - (-4.0f64).exp();
    for w in rows.windows(2) {
        assert!(w[1]["epsilon"].as_f64().unwrap() < w[0]["epsilon"].as_f64().unwrap());
        assert!((w[1]["ratio"].as_f64().unwrap() - f).abs() <= 1e-14);
    }
    assert_eq!(b["report"]["contraction_ok"], false);
}
