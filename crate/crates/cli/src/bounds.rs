//! Bounds-only mode: evaluates every applicable bound on a parameter grid.
//!
//! `bounds.csv` columns: `bound`, the bound parameters, the three terms,
//! `total` and `feasible`.

use std::path::Path;

use fedsim::theory::{evaluate_t1, evaluate_t2, evaluate_t4, evaluate_t5, params_for_config, BoundReport, TheoryParams};
use serde::Serialize;
use serde_json::Value as Json;

use crate::error::{CliError, CliResult};
use crate::spec::ExperimentSpec;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundRow {
    pub bound: &'static str,
    pub l: f64,
    pub beta: f64,
    pub sigma_sq: f64,
    pub m: usize,
    pub tau: usize,
    pub eta: f64,
    pub nu: f64,
    pub omega_sq: f64,
    pub delta_f: f64,
    pub k: usize,
    pub mu2: f64,
    pub eps: f64,
    pub rounds: usize,
    pub decay_lambda: f64,
    pub term_init: f64,
    pub term_noise: f64,
    pub term_local: f64,
    pub total: f64,
    pub feasible: bool,
}

impl BoundRow {
    fn new(bound: &'static str, p: &TheoryParams, r: &BoundReport) -> Self {
        Self {
            bound,
            l: p.l,
            beta: p.beta,
            sigma_sq: p.sigma_sq,
            m: p.m,
            tau: p.tau,
            eta: p.eta,
            nu: p.nu,
            omega_sq: p.omega_sq,
            delta_f: p.delta_f,
            k: p.k,
            mu2: p.mu2,
            eps: p.eps,
            rounds: p.rounds,
            decay_lambda: p.decay_lambda,
            term_init: r.term_init,
            term_noise: r.term_noise,
            term_local: r.term_local,
            total: r.total,
            feasible: r.feasible,
        }
    }
}

/// Bounds whose range conditions hold at `p`.
pub fn applicable_bounds(p: &TheoryParams) -> Vec<BoundRow> {
    let mut rows = vec![BoundRow::new("t1", p, &evaluate_t1(p))];
    if p.nu > 1.0 && p.nu <= p.tau as f64 {
        rows.push(BoundRow::new("t2", p, &evaluate_t2(p)));
    }
    if p.decay_lambda > 0.0 && p.decay_lambda < 1.0 {
        rows.push(BoundRow::new("t4", p, &evaluate_t4(p)));
    }
    let rate = p.eps * p.mu2;
    if rate > 0.0 && rate < 1.0 {
        rows.push(BoundRow::new("t5", p, &evaluate_t5(p)));
    }
    rows
}

fn toml_to_json(v: &toml::Value) -> Json {
    serde_json::to_value(v).unwrap_or(Json::Null)
}

/// Bound parameters for every point of the grid, axes in key order with the
/// last varying fastest. The base point comes from the run configuration when
/// its objective has a known smoothness constant.
pub fn grid_params(spec: &ExperimentSpec) -> CliResult<Vec<TheoryParams>> {
    let base = params_for_config(&spec.base)
        .map_err(|e| CliError::config("run", e.to_string()))?
        .unwrap_or_default();
    let base_json = serde_json::to_value(&base)?;
    let axes = &spec.bounds_grid;
    for axis in axes {
        if base_json.get(&axis.path).is_none() {
            return Err(CliError::config(format!("bounds.{}", axis.path), "not a bound parameter"));
        }
    }
    let total: usize = axes.iter().map(|a| a.values.len()).product();
    let mut out = Vec::with_capacity(total);
    for index in 0..total {
        let mut point = base_json.clone();
        let mut rest = index;
        for axis in axes.iter().rev() {
            let v = &axis.values[rest % axis.values.len()];
            rest /= axis.values.len();
            point[&axis.path] = toml_to_json(v);
        }
        let p: TheoryParams = serde_json::from_value(point)
            .map_err(|e| CliError::config("bounds", e.to_string()))?;
        p.validate().map_err(|e| CliError::config("bounds", e.to_string()))?;
        out.push(p);
    }
    Ok(out)
}

pub fn write_bounds(spec: &ExperimentSpec, path: &Path) -> CliResult<usize> {
    let mut w = csv::Writer::from_path(path)?;
    let mut n = 0;
    for p in grid_params(spec)? {
        for row in applicable_bounds(&p) {
            w.serialize(row)?;
            n += 1;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))?;
    Ok(n)
}
