//! The simulation engine: periodic averaging with heterogeneous local-update
//! budgets, optional decay weighting, and gradient gossip.
//!
//! Wall iterations `k = 0..K` are indexed by the reference agent's local
//! steps, `K = epochs * ceil(epoch_len / batch_len)`. A period starts at
//! `t0` and ends after `tau` iterations (or at `K`); agent `i` takes a step
//! at iteration `s` only while `tau_i > s - t0`.

mod agent;
pub mod validators;

pub use agent::{aggregate, local_sgd_step, AgentState, DecaySchedule, VirtualAgent};

use serde::{Deserialize, Serialize};

use crate::config::{Method, RunConfig};
use crate::consensus::{gossip_rounds, Topology};
use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::rng::{RngStream, StreamPurpose};
use crate::scheduler::{draw_period, PeriodPlan, TimingKind, TimingModel};
use crate::vector::ParamVector;

/// State at one aggregation point, with cumulative event counters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub k: usize,
    pub grad_norm_sq: f64,
    pub participants: usize,
    pub cum_comm: u64,
    pub cum_comp: u64,
    pub cum_inter_comm: u64,
    pub cum_inter_comp: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// Row 0 is the initial point; one row per aggregation follows.
    pub rows: Vec<RecordRow>,
    pub iterations: usize,
    /// Mean and population variance of all realized budgets.
    pub nu_hat: f64,
    pub omega_sq_hat: f64,
    pub skipped_periods: usize,
    pub final_theta: ParamVector,
}

impl RunRecord {
    pub fn last(&self) -> Option<&RecordRow> {
        self.rows.last()
    }
}

/// Average of `||grad F(theta_bar_k)||^2` over all recorded rows.
pub fn expected_gradient_metric(record: &RunRecord) -> Result<f64> {
    if record.rows.is_empty() {
        return Err(Error::EmptyRecord);
    }
    let sum: f64 = record.rows.iter().map(|r| r.grad_norm_sq).sum();
    Ok(sum / record.rows.len() as f64)
}

/// Runs a validated configuration. The objective, initial point, timing and
/// topology are all built from `config`.
pub fn run_config(config: &RunConfig) -> Result<RunRecord> {
    config.validate()?;
    let obj = config.objective()?;
    let theta0 = config.theta0(&obj)?;
    let timing = config.timing_model()?;
    let topo = match config.method {
        Method::Consensus => Some(config.topology()?),
        _ => None,
    };
    run(config, &obj, &theta0, &timing, topo.as_ref())
}

/// Runs the simulation with explicit inputs; `topo` is required for consensus
/// and spans the `participants` slots.
pub fn run(
    config: &RunConfig,
    obj: &Objective,
    theta0: &ParamVector,
    timing: &TimingModel,
    topo: Option<&Topology>,
) -> Result<RunRecord> {
    let m = config.participants;
    let tau = config.tau;
    let k_total = config.iterations();
    if theta0.len() != obj.dim() {
        return Err(Error::LengthMismatch {
            expected: obj.dim(),
            actual: theta0.len(),
        });
    }
    if timing.n_agents() != config.n_agents {
        return Err(Error::invalid("timing.means", "length must equal n_agents"));
    }
    let gossip = match (config.method, topo) {
        (Method::Consensus, Some(t)) => {
            if t.n() != m {
                return Err(Error::invalid("topology", "must have one node per participant slot"));
            }
            Some((t, t.total_degree() as u64 * config.consensus_rounds as u64))
        }
        (Method::Consensus, None) => {
            return Err(Error::invalid("topology", "required when method = consensus"))
        }
        _ => None,
    };
    let decay = match config.method {
        Method::Decay => Some(DecaySchedule::new(config.decay_lambda)?.weights(tau)),
        _ => None,
    };

    let mut agents: Vec<AgentState> = (0..config.n_agents)
        .map(|i| {
            let rng = RngStream::for_agent(config.seed, StreamPurpose::Gradient, i);
            AgentState::new(i, theta0.clone(), rng)
        })
        .collect();
    let mut virtual_agent = VirtualAgent::new(theta0.clone());
    let mut counters = [0u64; 4];
    let mut rows = vec![row(obj, &virtual_agent.theta_bar, 0, 0, counters, 0)?];
    let mut fixed_plan: Option<PeriodPlan> = None;
    let mut budgets: Vec<usize> = Vec::new();
    let mut skipped = 0;
    let mut t0 = 0;
    let mut period = 0u64;

    while t0 < k_total {
        let len = tau.min(k_total - t0);
        let plan = match &fixed_plan {
            Some(p) => p.clone(),
            None => {
                let mut p = draw_period(timing, tau, config.seed, period)?;
                p.truncate(m);
                if timing.kind == TimingKind::Deterministic || config.timing.freeze {
                    fixed_plan = Some(p.clone());
                }
                p
            }
        };
        period += 1;
        if plan.is_empty() {
            skipped += 1;
            t0 += len;
            continue;
        }
        for (&id, &t) in plan.participants.iter().zip(&plan.tau_per_agent) {
            agents[id].reset(&virtual_agent.theta_bar, t.min(len));
            budgets.push(t);
        }
        let last_k = rows.last().map_or(0, |r| r.k);
        let diverged = |k: usize| move |e: Error| match e {
            Error::NonFinite(_) => Error::Diverged { k, last_finite_k: last_k },
            other => other,
        };

        for s in t0..t0 + len {
            let offset = s - t0;
            match gossip {
                Some((topo, _)) => {
                    let mut grads = Vec::with_capacity(m);
                    for slot in 0..m {
                        let g = match plan.participants.get(slot) {
                            Some(&id) if agents[id].has_budget() => {
                                counters[1] += 1;
                                agents[id].draw_gradient(obj).map_err(diverged(s))?
                            }
                            _ => ParamVector::zeros(obj.dim()),
                        };
                        grads.push(g);
                    }
                    let mixed = gossip_rounds(&grads, topo, config.consensus_eps, config.consensus_rounds)?;
                    for (&id, g) in plan.participants.iter().zip(mixed) {
                        agents[id].apply_step(s, config.eta, g).map_err(diverged(s))?;
                    }
                }
                None => {
                    let weight = decay.as_ref().map_or(1.0, |w| w[offset]);
                    for &id in &plan.participants {
                        if agents[id].has_budget() {
                            counters[1] += 1;
                            local_sgd_step(&mut agents[id], obj, config.eta, weight, s)
                                .map_err(diverged(s))?;
                        }
                    }
                }
            }
            if let Some((_, per_iter)) = gossip {
                counters[2] += per_iter;
                counters[3] += per_iter;
            }
        }

        let k = t0 + len;
        let mut present: Vec<&mut AgentState> = agents
            .iter_mut()
            .filter(|a| plan.participants.contains(&a.id))
            .collect();
        // aggregation sums in slot order
        present.sort_by_key(|a| plan.participants.iter().position(|&p| p == a.id));
        aggregate(&mut virtual_agent, &mut present, config.eta, m).map_err(diverged(k))?;
        counters[0] += plan.len() as u64;
        let r = row(obj, &virtual_agent.theta_bar, k, plan.len(), counters, last_k)?;
        rows.push(r);
        t0 = k;
    }

    let (nu_hat, omega_sq_hat) = crate::scheduler::nu_omega(&budgets);
    Ok(RunRecord {
        rows,
        iterations: k_total,
        nu_hat,
        omega_sq_hat,
        skipped_periods: skipped,
        final_theta: virtual_agent.theta_bar,
    })
}

fn row(
    obj: &Objective,
    theta_bar: &ParamVector,
    k: usize,
    participants: usize,
    counters: [u64; 4],
    last_finite_k: usize,
) -> Result<RecordRow> {
    let grad_norm_sq = obj
        .full_gradient(theta_bar)
        .and_then(|g| g.norm_sq())
        .map_err(|e| match e {
            Error::NonFinite(_) => Error::Diverged { k, last_finite_k },
            other => other,
        })?;
    Ok(RecordRow {
        k,
        grad_norm_sq,
        participants,
        cum_comm: counters[0],
        cum_comp: counters[1],
        cum_inter_comm: counters[2],
        cum_inter_comp: counters[3],
    })
}
