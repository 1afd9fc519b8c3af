//! Per-agent local SGD state and the virtual agent's periodic aggregation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::rng::RngStream;
use crate::vector::ParamVector;

#[derive(Clone, Debug)]
pub struct AgentState {
    pub id: usize,
    pub theta: ParamVector,
    /// `(iteration, weighted gradient)` for every local step this period.
    pub pending_grads: Vec<(usize, ParamVector)>,
    pub tau_i: usize,
    pub rng: RngStream,
}

impl AgentState {
    pub fn new(id: usize, theta: ParamVector, rng: RngStream) -> Self {
        Self {
            id,
            theta,
            pending_grads: Vec::new(),
            tau_i: 0,
            rng,
        }
    }

    /// Starts a period from the broadcast parameters with budget `tau_i`.
    pub fn reset(&mut self, theta_bar: &ParamVector, tau_i: usize) {
        self.theta = theta_bar.clone();
        self.pending_grads.clear();
        self.tau_i = tau_i;
    }

    pub fn has_budget(&self) -> bool {
        self.pending_grads.len() < self.tau_i
    }

    /// Draws a mini-batch gradient at the current local parameters.
    pub fn draw_gradient(&mut self, obj: &Objective) -> Result<ParamVector> {
        obj.sample_gradient(&self.theta, &mut self.rng)
    }

    /// Applies `theta <- theta - eta * step` and stores `step` for iteration `s`.
    pub fn apply_step(&mut self, s: usize, eta: f64, step: ParamVector) -> Result<()> {
        self.theta.axpy_assign(-eta, &step)?;
        self.pending_grads.push((s, step));
        Ok(())
    }
}

/// One weighted local step: draws `g`, applies `theta <- theta - eta w g` and
/// stores `w g`.
pub fn local_sgd_step(
    agent: &mut AgentState,
    obj: &Objective,
    eta: f64,
    weight: f64,
    s: usize,
) -> Result<()> {
    if !(weight > 0.0 && weight <= 1.0) {
        return Err(Error::invalid("weight", "must lie in (0, 1]"));
    }
    if !agent.has_budget() {
        return Err(Error::BudgetExhausted { agent: agent.id });
    }
    let g = agent.draw_gradient(obj)?;
    let step = if weight == 1.0 { g } else { g.scaled(weight)? };
    agent.apply_step(s, eta, step)
}

#[derive(Clone, Debug, PartialEq)]
pub struct VirtualAgent {
    pub theta_bar: ParamVector,
    /// Completed aggregations.
    pub z: usize,
}

impl VirtualAgent {
    pub fn new(theta0: ParamVector) -> Self {
        Self { theta_bar: theta0, z: 0 }
    }
}

/// Within-period weights `D(s) = lambda^((s - t0) / 2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecaySchedule {
    pub lambda: f64,
}

impl DecaySchedule {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::invalid("decay_lambda", "must lie in (0, 1]"));
        }
        Ok(Self { lambda })
    }

    /// Weight of the local step at `offset = s - t0`.
    pub fn weight(&self, offset: usize) -> f64 {
        self.lambda.powf(offset as f64 / 2.0)
    }

    pub fn weights(&self, tau: usize) -> Vec<f64> {
        (0..tau).map(|o| self.weight(o)).collect()
    }
}

/// `theta_bar <- theta_bar - eta / m * sum_i sum_s stored_i(s)`, then
/// broadcasts `theta_bar` to every agent and clears their stored gradients.
/// `m` is the configured participant count, not the number present.
pub fn aggregate(
    virtual_agent: &mut VirtualAgent,
    agents: &mut [&mut AgentState],
    eta: f64,
    m: usize,
) -> Result<()> {
    if agents.is_empty() {
        return Err(Error::NoParticipants);
    }
    let dim = virtual_agent.theta_bar.len();
    let mut acc = ParamVector::zeros(dim);
    for agent in agents.iter() {
        for (_, g) in &agent.pending_grads {
            acc.axpy_assign(1.0, g)?;
        }
    }
    virtual_agent
        .theta_bar
        .axpy_assign(-eta / m as f64, &acc)?;
    virtual_agent.z += 1;
    for agent in agents.iter_mut() {
        agent.theta = virtual_agent.theta_bar.clone();
        agent.pending_grads.clear();
    }
    Ok(())
}
