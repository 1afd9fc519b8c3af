//! Experiment files: a base run, sweep axes, seeds, costs and outputs.
//!
//! ```toml
//! seeds = [1, 2, 3]
//!
//! [run]
//! method = "pavg"          # pavg | decay | consensus
//! tau = 10
//!
//! [run.objective]
//! kind = "quadratic"
//!
//! [[sweep]]
//! path = "tau"             # dotted path below [run]
//! values = [1, 5, 10, 15]
//!
//! [costs]
//! c1 = 1.0
//!
//! [output]
//! dir = "out"
//! ```

use std::path::PathBuf;

use fedsim::accounting::CostParams;
use fedsim::config::{Method, RunConfig};
use fedsim::Error;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    pub path: String,
    pub values: Vec<Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
    /// Any of `csv` (per-run time series), `jsonl` (summaries) and
    /// `aggregate` (per-grid-point table).
    pub formats: Vec<String>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            formats: vec!["csv".into(), "jsonl".into(), "aggregate".into()],
        }
    }
}

impl OutputSpec {
    pub fn wants(&self, format: &str) -> bool {
        self.formats.iter().any(|f| f == format)
    }
}

/// Axes of the theory grid written in bounds-only mode, keyed by bound
/// parameter name (`tau`, `eta`, `decay_lambda`, ...).
pub type BoundsGrid = Vec<SweepAxis>;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    #[serde(default)]
    run: Table,
    #[serde(default)]
    sweep: Vec<SweepAxis>,
    seeds: Option<Vec<u64>>,
    #[serde(default)]
    costs: CostParams,
    #[serde(default)]
    output: OutputSpec,
    #[serde(default)]
    bounds: Table,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub base_table: Table,
    pub base: RunConfig,
    pub sweeps: Vec<SweepAxis>,
    pub seeds: Vec<u64>,
    pub costs: CostParams,
    pub output: OutputSpec,
    pub bounds_grid: BoundsGrid,
}

/// One run of an experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct PlannedRun {
    pub id: String,
    pub grid_index: usize,
    /// `(path, value)` of every sweep axis at this grid point.
    pub grid: Vec<(String, String)>,
    pub seed: u64,
    pub config: RunConfig,
}

#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seeds: Option<Vec<u64>>,
    pub method: Option<Method>,
    pub out: Option<PathBuf>,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

fn syntax(text: &str, err: toml::de::Error) -> CliError {
    let (line, column) = err.span().map_or((0, 0), |s| line_col(text, s.start));
    CliError::Syntax {
        line,
        column,
        message: err.message().to_string(),
    }
}

fn semantic(prefix: &str, err: Error) -> CliError {
    match err {
        Error::InvalidParameter { name, reason } => CliError::config(format!("{prefix}.{name}"), reason),
        other => CliError::config(prefix, other.to_string()),
    }
}

/// Sets `path` (dot separated) inside `table`, creating sub-tables.
fn set_path(table: &mut Table, path: &str, value: Value) -> CliResult<()> {
    let mut parts: Vec<&str> = path.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| CliError::config("sweep.path", "empty path"))?;
    let mut cur = table;
    for part in parts {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::config(format!("run.{path}"), format!("`{part}` is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

fn decode_run(table: &Table, context: &str) -> CliResult<RunConfig> {
    let mut table = table.clone();
    // an objective section without `kind` refines the default quadratic
    if let Some(Value::Table(obj)) = table.get_mut("objective") {
        obj.entry("kind").or_insert_with(|| Value::String("quadratic".into()));
    }
    let text = toml::to_string(&table).map_err(|e| CliError::config(context, e.to_string()))?;
    toml::from_str::<RunConfig>(&text).map_err(|e| CliError::config(context, e.message().to_string()))
}

fn value_label(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Parses and validates an experiment; every planned run's configuration is
/// checked up front.
pub fn parse_config(text: &str) -> CliResult<ExperimentSpec> {
    parse_config_with(text, &Overrides::default())
}

pub fn parse_config_with(text: &str, overrides: &Overrides) -> CliResult<ExperimentSpec> {
    let raw: RawSpec = toml::from_str(text).map_err(|e| syntax(text, e))?;
    let mut base_table = raw.run;
    if let Some(method) = overrides.method {
        base_table.insert("method".into(), Value::String(method.as_str().into()));
    }
    let base = decode_run(&base_table, "run")?;
    for axis in &raw.sweep {
        if axis.values.is_empty() {
            return Err(CliError::config(format!("sweep[{}]", axis.path), "no values"));
        }
    }
    let seeds = overrides
        .seeds
        .clone()
        .or(raw.seeds)
        .unwrap_or_else(|| vec![base.seed]);
    if seeds.is_empty() {
        return Err(CliError::config("seeds", "must not be empty"));
    }
    raw.costs.validate().map_err(|e| semantic("costs", e))?;
    let mut output = raw.output;
    if let Some(out) = &overrides.out {
        output.dir = out.clone();
    }
    let mut bounds_grid = Vec::new();
    for (key, value) in raw.bounds {
        let values = match value {
            Value::Array(a) => a,
            single => vec![single],
        };
        bounds_grid.push(SweepAxis { path: key, values });
    }
    let spec = ExperimentSpec {
        base_table,
        base,
        sweeps: raw.sweep,
        seeds,
        costs: raw.costs,
        output,
        bounds_grid,
    };
    spec.plan()?;
    Ok(spec)
}

impl ExperimentSpec {
    pub fn grid_points(&self) -> usize {
        self.sweeps.iter().map(|a| a.values.len()).product()
    }

    /// The cartesian product of sweep axes (first axis slowest) times seeds.
    pub fn plan(&self) -> CliResult<Vec<PlannedRun>> {
        let mut runs = Vec::with_capacity(self.grid_points() * self.seeds.len());
        for grid_index in 0..self.grid_points() {
            let mut table = self.base_table.clone();
            let mut grid = Vec::with_capacity(self.sweeps.len());
            let mut rest = grid_index;
            let mut picks = vec![0; self.sweeps.len()];
            for (i, axis) in self.sweeps.iter().enumerate().rev() {
                picks[i] = rest % axis.values.len();
                rest /= axis.values.len();
            }
            for (axis, &pick) in self.sweeps.iter().zip(&picks) {
                let value = axis.values[pick].clone();
                grid.push((axis.path.clone(), value_label(&value)));
                set_path(&mut table, &axis.path, value)?;
            }
            let context = if grid.is_empty() {
                "run".to_string()
            } else {
                format!("run (grid point {grid_index})")
            };
            let template = decode_run(&table, &context)?;
            for &seed in &self.seeds {
                let config = RunConfig { seed, ..template.clone() };
                config.validate().map_err(|e| semantic("run", e))?;
                runs.push(PlannedRun {
                    id: format!("g{grid_index:03}_s{seed}"),
                    grid_index,
                    grid: grid.clone(),
                    seed,
                    config,
                });
            }
        }
        Ok(runs)
    }
}
