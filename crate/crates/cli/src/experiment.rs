//! Executes planned runs and writes their outputs.
//!
//! Output layout under the experiment directory:
//!
//! - `runs/<id>.csv`: `k,grad_norm_sq,participants,cum_comm,cum_comp,cum_inter_comm,cum_inter_comp`
//! - `summary.jsonl`: one [`RunSummary`] per run, in plan order
//! - `aggregate.csv`: mean and standard error across seeds per grid point

use std::fs;
use std::path::Path;

use fedsim::accounting::{cost_analytic, cost_counted, psi2_estimate, utility, CostParams, CostReport};
use fedsim::config::{Method, RunConfig};
use fedsim::scheduler::{compute_tau, TimingKind};
use fedsim::theory::{bound_for_config, BoundReport};
use fedsim::trainer::{expected_gradient_metric, run_config, RecordRow};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::spec::{ExperimentSpec, PlannedRun};

pub const RUN_COLUMNS: [&str; 7] = [
    "k",
    "grad_norm_sq",
    "participants",
    "cum_comm",
    "cum_comp",
    "cum_inter_comm",
    "cum_inter_comp",
];

pub const AGGREGATE_COLUMNS: [&str; 9] = [
    "grid_index",
    "grid",
    "runs",
    "ok",
    "metric_mean",
    "metric_stderr",
    "cost_total_mean",
    "cost_total_stderr",
    "bound_total",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedBound {
    pub name: String,
    #[serde(flatten)]
    pub report: BoundReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub id: String,
    pub grid_index: usize,
    pub grid: Vec<(String, String)>,
    pub seed: u64,
    pub status: String,
    pub error: Option<String>,
    pub metric: Option<f64>,
    pub iterations: usize,
    pub nu_hat: Option<f64>,
    pub omega_sq_hat: Option<f64>,
    pub bound: Option<NamedBound>,
    pub cost_counted: Option<CostReport>,
    pub cost_analytic: CostReport,
    pub psi2: Option<f64>,
    /// Utility with the measured metric as `psi1`.
    pub utility_empirical: Option<f64>,
    /// Utility with the bound total as `psi1`.
    pub utility_analytic: Option<f64>,
    pub config: RunConfig,
}

impl RunSummary {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentOutcome {
    pub summaries: Vec<RunSummary>,
    pub failures: usize,
}

impl ExperimentOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.failures > 0 {
            2
        } else {
            0
        }
    }
}

/// Budgets assumed by the closed-form cost: the deterministic budgets, or
/// `tau` for every slot under stochastic timing.
fn nominal_budgets(cfg: &RunConfig) -> Vec<usize> {
    match cfg.timing_model() {
        Ok(model) if model.kind == TimingKind::Deterministic => compute_tau(cfg.tau, &model.means)
            .map(|mut t| {
                t.truncate(cfg.participants);
                t
            })
            .unwrap_or_default(),
        _ => vec![cfg.tau; cfg.participants],
    }
}

fn summarize(run: &PlannedRun, costs: &CostParams) -> (RunSummary, Option<Vec<RecordRow>>) {
    let cfg = &run.config;
    let topo = match cfg.method {
        Method::Consensus => cfg.topology().ok(),
        _ => None,
    };
    let analytic = cost_analytic(cfg, &nominal_budgets(cfg), topo.as_ref(), costs);
    let bound = bound_for_config(cfg).ok().flatten().map(|(name, report)| NamedBound {
        name: name.to_string(),
        report,
    });
    let psi2 = cfg
        .objective()
        .and_then(|obj| cfg.theta0(&obj).and_then(|t| psi2_estimate(&obj, &t)))
        .ok();
    let mut summary = RunSummary {
        id: run.id.clone(),
        grid_index: run.grid_index,
        grid: run.grid.clone(),
        seed: run.seed,
        status: "ok".into(),
        error: None,
        metric: None,
        iterations: cfg.iterations(),
        nu_hat: None,
        omega_sq_hat: None,
        bound,
        cost_counted: None,
        cost_analytic: analytic,
        psi2,
        utility_empirical: None,
        utility_analytic: None,
        config: cfg.clone(),
    };
    let record = match run_config(cfg) {
        Ok(r) => r,
        Err(e) => {
            summary.status = "error".into();
            summary.error = Some(e.to_string());
            return (summary, None);
        }
    };
    let metric = expected_gradient_metric(&record).ok();
    let counted = cost_counted(&record, costs);
    summary.metric = metric;
    summary.nu_hat = Some(record.nu_hat);
    summary.omega_sq_hat = Some(record.omega_sq_hat);
    summary.cost_counted = Some(counted);
    if let Some(psi2) = psi2 {
        summary.utility_empirical = metric.and_then(|m| utility(counted.total, m, psi2, costs.alpha).ok());
        summary.utility_analytic = summary
            .bound
            .as_ref()
            .and_then(|b| utility(counted.total, b.report.total, psi2, costs.alpha).ok());
    }
    (summary, Some(record.rows))
}

pub fn write_run_csv(path: &Path, rows: &[RecordRow]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn write_aggregate(path: &Path, summaries: &[RunSummary]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(AGGREGATE_COLUMNS)?;
    let max_grid = summaries.iter().map(|s| s.grid_index + 1).max().unwrap_or(0);
    for g in 0..max_grid {
        let group: Vec<&RunSummary> = summaries.iter().filter(|s| s.grid_index == g).collect();
        let Some(first) = group.first() else { continue };
        let label = first
            .grid
            .iter()
            .map(|(p, v)| format!("{p}={v}"))
            .collect::<Vec<_>>()
            .join(";");
        let metrics: Vec<f64> = group.iter().filter_map(|s| s.metric).collect();
        let costs: Vec<f64> = group.iter().filter_map(|s| s.cost_counted.map(|c| c.total)).collect();
        let (mm, ms) = mean_stderr(&metrics);
        let (cm, cs) = mean_stderr(&costs);
        let bound = first.bound.as_ref().map_or(String::new(), |b| b.report.total.to_string());
        w.write_record([
            g.to_string(),
            label,
            group.len().to_string(),
            group.iter().filter(|s| s.ok()).count().to_string(),
            mm.to_string(),
            ms.to_string(),
            cm.to_string(),
            cs.to_string(),
            bound,
        ])?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn pool(jobs: Option<usize>) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::config("--jobs", e.to_string()))
}

/// Runs every planned run on a pool of `jobs` workers (all cores when
/// `None`). Results are written in plan order, so the output does not depend
/// on the worker count.
pub fn run_experiment(spec: &ExperimentSpec, jobs: Option<usize>) -> CliResult<ExperimentOutcome> {
    let plan = spec.plan()?;
    let dir = &spec.output.dir;
    let runs_dir = dir.join("runs");
    let want_csv = spec.output.wants("csv");
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    if want_csv {
        fs::create_dir_all(&runs_dir).map_err(|e| CliError::io(&runs_dir, e))?;
    }
    let results: Vec<CliResult<RunSummary>> = pool(jobs)?.install(|| {
        plan.par_iter()
            .map(|run| {
                let (summary, rows) = summarize(run, &spec.costs);
                if let (true, Some(rows)) = (want_csv, rows) {
                    write_run_csv(&runs_dir.join(format!("{}.csv", run.id)), &rows)?;
                }
                Ok(summary)
            })
            .collect()
    });
    let summaries = results.into_iter().collect::<CliResult<Vec<_>>>()?;
    if spec.output.wants("jsonl") {
        let mut text = String::new();
        for s in &summaries {
            text.push_str(&serde_json::to_string(s)?);
            text.push('\n');
        }
        let path = dir.join("summary.jsonl");
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    }
    if spec.output.wants("aggregate") {
        write_aggregate(&dir.join("aggregate.csv"), &summaries)?;
    }
    let failures = summaries.iter().filter(|s| !s.ok()).count();
    Ok(ExperimentOutcome { summaries, failures })
}
