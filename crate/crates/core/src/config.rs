//! Run configuration read from a JSON document.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bounds::Lipschitz;
use crate::equilibrium::SolverOptions;
use crate::error::{Error, Result};
use crate::forward::ForwardOptions;
use crate::lattice::{TimeGrid, DEFAULT_POINT_BUDGET};
use crate::model::{CorruptionModel, CorruptionParams, GameModel, Model, TableModel, TableParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "params", deny_unknown_fields)]
pub enum ModelConfig {
    #[serde(rename = "corruption")]
    Corruption(#[serde(default)] CorruptionParams),
    #[serde(rename = "custom-table")]
    Table(TableParams),
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::Corruption(CorruptionParams::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub horizon: f64,
    pub steps: usize,
    /// Shock cap; when absent the model's own value is used.
    pub shocks: Option<usize>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            horizon: 2.0,
            steps: 200,
            shocks: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iters: usize,
    pub damping: f64,
    pub frozen_policy: bool,
    pub point_budget: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iters: 200,
            damping: 1.0,
            frozen_policy: false,
            point_budget: DEFAULT_POINT_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    /// Paths for the value check and the time-averaged shares.
    pub paths: usize,
    /// Population size of the aggregation check.
    pub agents: usize,
    pub seed: u64,
    /// Paths written to `paths.csv`.
    pub sample_paths: usize,
    /// Directory holding `mu.csv` and `v.csv` from an earlier solve.
    pub solution: Option<String>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            paths: 100_000,
            agents: 10_000,
            seed: 0,
            sample_paths: 20,
            solution: None,
        }
    }
}

/// Replacements for the model-derived suprema.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtremaOverrides {
    pub q_max: Option<f64>,
    pub psi_max: Option<f64>,
    pub terminal_max: Option<f64>,
    pub lambda_max: Option<f64>,
    pub j_max: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsConfig {
    pub lipschitz: Option<Lipschitz>,
    #[serde(flatten)]
    pub overrides: ExtremaOverrides,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Model parameter to vary, e.g. `lambda` or `q_soc`.
    pub parameter: String,
    pub values: Vec<f64>,
    /// Shock paths per sweep value for the time-averaged shares.
    pub paths: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            parameter: "lambda".into(),
            values: (0..=10).map(|i| i as f64 / 5.0).collect(),
            paths: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
    /// Highest shock count exported to the field CSVs; all when absent.
    pub max_level: Option<usize>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: "out".into(),
            max_level: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub grid: GridConfig,
    pub solver: SolverConfig,
    pub simulate: SimulateConfig,
    pub bounds: BoundsConfig,
    pub sweep: SweepConfig,
    pub output: OutputConfig,
}

/// Sets `path` (dot separated) in a JSON document, creating objects on the
/// way. The value is parsed as JSON and taken as a string otherwise.
pub fn apply_override(doc: &mut Value, path: &str, raw: &str) -> Result<()> {
    let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.into()));
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::Config(format!("bad override path '{path}'")));
    }
    let mut cur = doc;
    for key in &keys[..keys.len() - 1] {
        if !cur.is_object() {
            return Err(Error::Config(format!("'{path}' does not name an object field")));
        }
        cur = cur
            .as_object_mut()
            .unwrap()
            .entry(key.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    match cur.as_object_mut() {
        Some(obj) => {
            obj.insert(keys[keys.len() - 1].to_string(), value);
            Ok(())
        }
        None => Err(Error::Config(format!("'{path}' does not name an object field"))),
    }
}

/// Parses `key=value`.
pub fn split_override(s: &str) -> Result<(&str, &str)> {
    s.split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{s}' is not of the form key=value")))
}

impl RunConfig {
    pub fn from_value(mut doc: Value) -> Result<Self> {
        // The name defaults to the built-in model, whose params may be left out.
        if let Some(m) = doc.get_mut("model").and_then(Value::as_object_mut) {
            m.entry("name").or_insert_with(|| Value::String("corruption".into()));
            if m.get("name").and_then(Value::as_str) == Some("corruption") {
                m.entry("params").or_insert_with(|| Value::Object(Default::default()));
            }
        }
        let cfg: RunConfig = serde_json::from_value(doc).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a document, applies `key=value` overrides and validates.
    pub fn load(text: Option<&str>, overrides: &[String]) -> Result<Self> {
        let mut doc: Value = match text {
            Some(t) => serde_json::from_str(t).map_err(|e| Error::Config(format!("invalid JSON: {e}")))?,
            None => Value::Object(Default::default()),
        };
        for o in overrides {
            let (k, v) = split_override(o)?;
            apply_override(&mut doc, k, v)?;
        }
        Self::from_value(doc)
    }

    pub fn validate(&self) -> Result<()> {
        self.time_grid()?;
        self.solver_options().validate()?;
        self.build_model()?;
        if self.simulate.paths == 0 || self.simulate.agents == 0 {
            return Err(Error::Config("simulate.paths and simulate.agents must be positive".into()));
        }
        Ok(())
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        Ok(TimeGrid::new(self.grid.horizon, self.grid.steps)?)
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.solver.tol,
            max_iters: self.solver.max_iters,
            damping: self.solver.damping,
            forward: ForwardOptions {
                frozen_policy: self.solver.frozen_policy,
            },
            point_budget: self.solver.point_budget,
            ..Default::default()
        }
    }

    pub fn build_model(&self) -> Result<Model> {
        Ok(match &self.model {
            ModelConfig::Corruption(p) => {
                let mut p = p.clone();
                if let Some(n) = self.grid.shocks {
                    p.shocks = n;
                }
                Model::Corruption(CorruptionModel::new(p)?)
            }
            ModelConfig::Table(p) => {
                let mut p = p.clone();
                if let Some(n) = self.grid.shocks {
                    if p.lambda.len() > 1 && p.lambda.len() != n {
                        return Err(Error::Config(format!(
                            "grid.shocks = {n} does not match {} lambda entries",
                            p.lambda.len()
                        )));
                    }
                    p.shocks = n;
                }
                Model::Table(TableModel::new(p)?)
            }
        })
    }

    /// Copy with one model parameter replaced.
    pub fn with_model_param(&self, name: &str, value: f64) -> Result<Self> {
        let mut doc = serde_json::to_value(self)?;
        apply_override(&mut doc, &format!("model.params.{name}"), &value.to_string())?;
        Self::from_value(doc)
    }

    pub fn shock_cap(&self) -> Result<usize> {
        Ok(self.build_model()?.shock_cap())
    }
}
