//! Heterogeneous step timing and per-period local-update budgets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{RngStream, StreamPurpose};

/// Distribution of a single local step's wall-clock time around its mean.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimingKind {
    Deterministic,
    /// Uniform on `[mean (1 - spread), mean (1 + spread)]`, `0 <= spread < 1`.
    Uniform { spread: f64 },
    /// `mean (1 - spread) + Exp(mean spread)`, `0 < spread <= 1`.
    ShiftedExponential { spread: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingModel {
    pub kind: TimingKind,
    /// Mean step time per agent, non-decreasing.
    pub means: Vec<f64>,
}

impl TimingModel {
    pub fn new(kind: TimingKind, means: Vec<f64>) -> Result<Self> {
        let model = Self { kind, means };
        model.validate()?;
        Ok(model)
    }

    pub fn deterministic(means: Vec<f64>) -> Result<Self> {
        Self::new(TimingKind::Deterministic, means)
    }

    /// Homogeneous agents with unit step time.
    pub fn homogeneous(n_agents: usize) -> Self {
        Self {
            kind: TimingKind::Deterministic,
            means: vec![1.0; n_agents],
        }
    }

    /// Deterministic means whose budgets under `hi` fall linearly from `hi`
    /// (agent 0) to `lo` (last agent).
    pub fn linear_budgets(n_agents: usize, lo: usize, hi: usize) -> Result<Self> {
        if lo == 0 || lo > hi {
            return Err(Error::invalid("timing.tau_range", "need 1 <= lo <= hi"));
        }
        if n_agents == 0 {
            return Err(Error::invalid("n_agents", "must be positive"));
        }
        let span = (hi - lo) as f64;
        let denom = (n_agents.max(2) - 1) as f64;
        let means = (0..n_agents)
            .map(|i| {
                let target = hi as f64 - (span * i as f64 / denom).round();
                if target == hi as f64 {
                    1.0
                } else {
                    // floor(hi / m_i) lands on target
                    hi as f64 / (target + 0.5)
                }
            })
            .collect();
        Self::deterministic(means)
    }

    pub fn validate(&self) -> Result<()> {
        check_means(&self.means)?;
        match self.kind {
            TimingKind::Deterministic => Ok(()),
            TimingKind::Uniform { spread } if (0.0..1.0).contains(&spread) => Ok(()),
            TimingKind::ShiftedExponential { spread } if spread > 0.0 && spread <= 1.0 => Ok(()),
            _ => Err(Error::invalid("timing.spread", "out of range for the timing kind")),
        }
    }

    pub fn n_agents(&self) -> usize {
        self.means.len()
    }

    fn draw_step(&self, agent: usize, rng: &mut RngStream) -> f64 {
        let mean = self.means[agent];
        match self.kind {
            TimingKind::Deterministic => mean,
            TimingKind::Uniform { spread } => mean * (1.0 + spread * (2.0 * rng.uniform() - 1.0)),
            TimingKind::ShiftedExponential { spread } => {
                mean * (1.0 - spread) + mean * spread * rng.exp1()
            }
        }
    }
}

/// Local-update budgets for one period.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodPlan {
    pub tau: usize,
    /// Agent ids taking part, in the order their budgets are listed.
    pub participants: Vec<usize>,
    pub tau_per_agent: Vec<usize>,
}

impl PeriodPlan {
    pub fn len(&self) -> usize {
        self.participants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.participants.is_empty()
    }

    /// Keeps the first `m` participants.
    pub fn truncate(&mut self, m: usize) {
        self.participants.truncate(m);
        self.tau_per_agent.truncate(m);
    }

    /// Checks budgets lie in `1..=tau` and at least one reaches `tau`.
    pub fn check(&self) -> Result<()> {
        if self.participants.len() != self.tau_per_agent.len() {
            return Err(Error::LengthMismatch {
                expected: self.participants.len(),
                actual: self.tau_per_agent.len(),
            });
        }
        if self.tau_per_agent.iter().any(|&t| t == 0 || t > self.tau) {
            return Err(Error::invalid("tau_per_agent", "budgets must lie in 1..=tau"));
        }
        if !self.tau_per_agent.contains(&self.tau) {
            return Err(Error::invalid("tau_per_agent", "no agent reaches tau"));
        }
        Ok(())
    }
}

fn check_means(means: &[f64]) -> Result<()> {
    if means.is_empty() {
        return Err(Error::invalid("timing.means", "must not be empty"));
    }
    if means.iter().any(|m| !m.is_finite() || *m <= 0.0) {
        return Err(Error::invalid("timing.means", "must be positive and finite"));
    }
    if means.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("timing.means", "must be sorted non-decreasing"));
    }
    Ok(())
}

/// Budgets `floor(tau * means[0] / means[i])`, dropping the trailing agents
/// whose budget floors to zero.
pub fn compute_tau(tau: usize, means: &[f64]) -> Result<Vec<usize>> {
    check_means(means)?;
    if tau == 0 {
        return Err(Error::invalid("tau", "must be at least 1"));
    }
    let x1 = means[0];
    let out = means
        .iter()
        .enumerate()
        .map(|(i, &m)| if i == 0 { tau } else { (tau as f64 * x1 / m).floor() as usize })
        .take_while(|&t| t >= 1)
        .collect();
    Ok(out)
}

/// Mean and population variance of the budgets.
pub fn empirical_nu_omega(plan: &PeriodPlan) -> (f64, f64) {
    nu_omega(&plan.tau_per_agent)
}

pub fn nu_omega(taus: &[usize]) -> (f64, f64) {
    if taus.is_empty() {
        return (0.0, 0.0);
    }
    let n = taus.len() as f64;
    let mean = taus.iter().map(|&t| t as f64).sum::<f64>() / n;
    let var = taus.iter().map(|&t| (t as f64 - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

/// One period: agent 0 runs `tau` steps, the others count what they finish
/// inside the same window. Each agent draws from its own timing stream.
pub fn draw_period(model: &TimingModel, tau: usize, seed: u64, period: u64) -> Result<PeriodPlan> {
    model.validate()?;
    if tau == 0 {
        return Err(Error::invalid("tau", "must be at least 1"));
    }
    if model.kind == TimingKind::Deterministic {
        let taus = compute_tau(tau, &model.means)?;
        return Ok(PeriodPlan {
            tau,
            participants: (0..taus.len()).collect(),
            tau_per_agent: taus,
        });
    }
    let mut streams: Vec<RngStream> = (0..model.n_agents())
        .map(|i| period_stream(seed, i, period))
        .collect();
    let window: f64 = (0..tau).map(|_| model.draw_step(0, &mut streams[0])).sum();
    let mut plan = PeriodPlan {
        tau,
        participants: vec![0],
        tau_per_agent: vec![tau],
    };
    for (i, rng) in streams.iter_mut().enumerate().skip(1) {
        let mut elapsed = 0.0;
        let mut steps = 0;
        while steps < tau {
            elapsed += model.draw_step(i, rng);
            if elapsed > window {
                break;
            }
            steps += 1;
        }
        if steps > 0 {
            plan.participants.push(i);
            plan.tau_per_agent.push(steps);
        }
    }
    Ok(plan)
}

fn period_stream(seed: u64, agent: usize, period: u64) -> RngStream {
    let base = RngStream::for_agent(seed, StreamPurpose::Timing, agent);
    // periods occupy the bits between the agent id and the purpose tag
    RngStream::new(seed, base.stream_id() | (period << 20))
}
