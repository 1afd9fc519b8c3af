//! Resource cost in symbolic units and the utility of a run.
//!
//! Costs count four event types: uplink gradient transmissions (`C1`), local
//! updates (`C2`), gossip messages received (`W1`) and gossip combination
//! computations (`W2`).

use serde::{Deserialize, Serialize};

use crate::config::{Method, RunConfig};
use crate::consensus::Topology;
use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::trainer::RunRecord;
use crate::vector::ParamVector;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    pub c1: f64,
    pub c2: f64,
    pub w1: f64,
    pub w2: f64,
    pub alpha: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        Self {
            c1: 1.0,
            c2: 1.0,
            w1: 1.0,
            w2: 1.0,
            alpha: 1.0,
        }
    }
}

impl CostParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("c1", self.c1), ("c2", self.c2), ("w1", self.w1), ("w2", self.w2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!("costs.{name}"), "must be finite and non-negative"));
            }
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::invalid("costs.alpha", "must be positive"));
        }
        Ok(())
    }
}

/// Event counts in units of each cost, plus the weighted total.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub comm: f64,
    pub comp: f64,
    pub inter_comm: f64,
    pub inter_comp: f64,
    pub total: f64,
}

impl CostReport {
    pub fn from_counts(comm: f64, comp: f64, inter_comm: f64, inter_comp: f64, costs: &CostParams) -> Self {
        Self {
            comm,
            comp,
            inter_comm,
            inter_comp,
            total: costs.c1 * comm + costs.c2 * comp + costs.w1 * inter_comm + costs.w2 * inter_comp,
        }
    }
}

/// Closed-form cost with `T U / (tau P)` periods taken as a real number:
/// `sum_i (C1 + C2 tau_i) T U / (tau P)`, plus
/// `sum_i |N_i| (W1 + W2) E T U / P` when gossiping.
pub fn cost_analytic(
    config: &RunConfig,
    tau_list: &[usize],
    topo: Option<&Topology>,
    costs: &CostParams,
) -> CostReport {
    let tu_p = (config.epoch_len * config.epochs) as f64 / config.batch_len as f64;
    let periods = tu_p / config.tau as f64;
    let comm = tau_list.len() as f64 * periods;
    let comp = tau_list.iter().map(|&t| t as f64).sum::<f64>() * periods;
    let inter = match (config.method, topo) {
        (Method::Consensus, Some(t)) => t.total_degree() as f64 * config.consensus_rounds as f64 * tu_p,
        _ => 0.0,
    };
    CostReport::from_counts(comm, comp, inter, inter, costs)
}

/// Event counts of a schedule without simulating it: `K = U ceil(T / P)`
/// iterations split into periods of `tau` (the last may be shorter), every
/// listed agent uplinking once per period and computing `min(tau_i, len)`
/// gradients, and `sum_i |N_i| E` gossip events per iteration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub comm: u64,
    pub comp: u64,
    pub inter_comm: u64,
    pub inter_comp: u64,
}

impl EventCounts {
    pub fn from_schedule(config: &RunConfig, tau_list: &[usize], total_degree: usize) -> Self {
        let k = config.iterations();
        let tau = config.tau;
        let (full, rest) = (k / tau, k % tau);
        let mut comm = full as u64 * tau_list.len() as u64;
        let mut comp: u64 = tau_list.iter().map(|&t| (t.min(tau) * full) as u64).sum();
        if rest > 0 {
            comm += tau_list.len() as u64;
            comp += tau_list.iter().map(|&t| t.min(rest) as u64).sum::<u64>();
        }
        let inter = match config.method {
            Method::Consensus => (total_degree * config.consensus_rounds * k) as u64,
            _ => 0,
        };
        Self {
            comm,
            comp,
            inter_comm: inter,
            inter_comp: inter,
        }
    }

    pub fn from_record(record: &RunRecord) -> Self {
        record.last().map_or(
            Self {
                comm: 0,
                comp: 0,
                inter_comm: 0,
                inter_comp: 0,
            },
            |r| Self {
                comm: r.cum_comm,
                comp: r.cum_comp,
                inter_comm: r.cum_inter_comm,
                inter_comp: r.cum_inter_comp,
            },
        )
    }

    pub fn report(&self, costs: &CostParams) -> CostReport {
        CostReport::from_counts(
            self.comm as f64,
            self.comp as f64,
            self.inter_comm as f64,
            self.inter_comp as f64,
            costs,
        )
    }
}

/// Cost of the events a run actually performed.
pub fn cost_counted(record: &RunRecord, costs: &CostParams) -> CostReport {
    EventCounts::from_record(record).report(costs)
}

/// `alpha (psi2 - psi1) / psi`.
pub fn utility(psi: f64, psi1: f64, psi2: f64, alpha: f64) -> Result<f64> {
    if psi.is_nan() || psi <= 0.0 {
        return Err(Error::invalid("psi", "cost must be positive"));
    }
    Ok(alpha * (psi2 - psi1) / psi)
}

/// `||grad F(theta_0)||^2`.
pub fn psi2_estimate(obj: &Objective, theta0: &ParamVector) -> Result<f64> {
    obj.full_gradient(theta0)?.norm_sq()
}
