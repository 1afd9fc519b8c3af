//! Finite MDP with a tabular softmax policy.
//!
//! Mini-batches are rolled out from a fresh episode: the state is drawn from
//! the initial distribution at the start of the batch and again every
//! `horizon` transitions. Each transition contributes the per-step loss
//! `-r_t * log pi(s_t, a_t)`, so the expected mini-batch gradient is computable
//! exactly by propagating the state distribution forward.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::vector::ParamVector;

pub const MAX_STATES: usize = 32;
pub const MAX_ACTIONS: usize = 8;
const ROW_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MdpEnv {
    n_states: usize,
    n_actions: usize,
    /// `transitions[(s * A + a) * S + s']`.
    transitions: Vec<f64>,
    /// `rewards[s * A + a]`.
    rewards: Vec<f64>,
    initial: Vec<f64>,
    horizon: usize,
}

impl MdpEnv {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transitions: Vec<f64>,
        rewards: Vec<f64>,
        initial: Vec<f64>,
        horizon: usize,
    ) -> Result<Self> {
        if n_states == 0 || n_states > MAX_STATES {
            return Err(Error::invalid("mdp.states", format!("must be in 1..={MAX_STATES}")));
        }
        if n_actions == 0 || n_actions > MAX_ACTIONS {
            return Err(Error::invalid("mdp.actions", format!("must be in 1..={MAX_ACTIONS}")));
        }
        if horizon == 0 {
            return Err(Error::invalid("mdp.horizon", "must be at least 1"));
        }
        let sa = n_states * n_actions;
        if transitions.len() != sa * n_states {
            return Err(Error::LengthMismatch {
                expected: sa * n_states,
                actual: transitions.len(),
            });
        }
        if rewards.len() != sa {
            return Err(Error::LengthMismatch {
                expected: sa,
                actual: rewards.len(),
            });
        }
        if initial.len() != n_states {
            return Err(Error::LengthMismatch {
                expected: n_states,
                actual: initial.len(),
            });
        }
        if rewards.iter().any(|r| !r.is_finite()) {
            return Err(Error::NonFinite("MdpEnv::new"));
        }
        for (row, probs) in transitions.chunks(n_states).enumerate() {
            check_distribution(probs, &format!("mdp.transitions[{row}]"))?;
        }
        check_distribution(&initial, "mdp.initial")?;
        Ok(Self {
            n_states,
            n_actions,
            transitions,
            rewards,
            initial,
            horizon,
        })
    }

    /// Rewards given on arrival: `r(s, a) = sum_s' P(s' | s, a) R(s')`.
    pub fn from_state_rewards(
        n_states: usize,
        n_actions: usize,
        transitions: Vec<f64>,
        state_rewards: &[f64],
        initial: Vec<f64>,
        horizon: usize,
    ) -> Result<Self> {
        if state_rewards.len() != n_states {
            return Err(Error::LengthMismatch {
                expected: n_states,
                actual: state_rewards.len(),
            });
        }
        let rewards = transitions
            .chunks(n_states)
            .map(|row| row.iter().zip(state_rewards).map(|(p, r)| p * r).sum())
            .collect();
        Self::new(n_states, n_actions, transitions, rewards, initial, horizon)
    }

    /// Single-state bandit with one reward per arm.
    pub fn bandit(rewards: &[f64]) -> Result<Self> {
        let a = rewards.len();
        Self::new(1, a, vec![1.0; a], rewards.to_vec(), vec![1.0], 1)
    }

    /// Transition rows and initial distribution from normalized uniform draws,
    /// rewards uniform in `[0, 1)`.
    pub fn random(n_states: usize, n_actions: usize, horizon: usize, rng: &mut RngStream) -> Result<Self> {
        let mut transitions = Vec::with_capacity(n_states * n_actions * n_states);
        for _ in 0..n_states * n_actions {
            transitions.extend(normalized_draw(n_states, rng));
        }
        let rewards = (0..n_states * n_actions).map(|_| rng.uniform()).collect();
        let initial = normalized_draw(n_states, rng);
        Self::new(n_states, n_actions, transitions, rewards, initial, horizon)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn param_dim(&self) -> usize {
        self.n_states * self.n_actions
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[s * self.n_actions + a]
    }

    pub fn max_reward(&self) -> f64 {
        self.rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.transitions[start..start + self.n_states]
    }

    /// Softmax policy, `pi[s * A + a]`.
    pub fn policy(&self, theta: &ParamVector) -> Result<Vec<f64>> {
        self.check_theta(theta)?;
        let mut pi = Vec::with_capacity(self.param_dim());
        for logits in theta.as_slice().chunks(self.n_actions) {
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
            let z: f64 = exps.iter().sum();
            pi.extend(exps.iter().map(|e| e / z));
        }
        Ok(pi)
    }

    /// Distribution of the state at within-episode step `h`, for `h < len`.
    pub fn state_distributions(&self, theta: &ParamVector, len: usize) -> Result<Vec<Vec<f64>>> {
        let pi = self.policy(theta)?;
        let mut out = Vec::with_capacity(len);
        let mut d = self.initial.clone();
        for _ in 0..len {
            let mut next = vec![0.0; self.n_states];
            for s in 0..self.n_states {
                if d[s] == 0.0 {
                    continue;
                }
                for a in 0..self.n_actions {
                    let w = d[s] * pi[s * self.n_actions + a];
                    for (n, p) in next.iter_mut().zip(self.transition_row(s, a)) {
                        *n += w * p;
                    }
                }
            }
            out.push(std::mem::replace(&mut d, next));
        }
        Ok(out)
    }

    /// How often each within-episode step index occurs in a batch of `batch`.
    fn step_weights(&self, batch: usize) -> Vec<f64> {
        let h = self.horizon.min(batch);
        (0..h)
            .map(|i| ((batch - i).div_ceil(self.horizon)) as f64 / batch as f64)
            .collect()
    }

    /// Expected per-transition reward of a `batch`-long rollout.
    pub fn expected_reward(&self, theta: &ParamVector, batch: usize) -> Result<f64> {
        let pi = self.policy(theta)?;
        let w = self.step_weights(batch);
        let dists = self.state_distributions(theta, w.len())?;
        let mut total = 0.0;
        for (wh, d) in w.iter().zip(&dists) {
            for s in 0..self.n_states {
                for a in 0..self.n_actions {
                    total += wh * d[s] * pi[s * self.n_actions + a] * self.reward(s, a);
                }
            }
        }
        Ok(total)
    }

    /// Expected value of the score-function estimator
    /// `(1/P) sum_t r_t grad log pi(s_t, a_t)` (ascent direction on reward).
    /// The state distribution is held fixed, as in the per-step surrogate.
    pub fn reward_gradient(&self, theta: &ParamVector, batch: usize) -> Result<ParamVector> {
        if batch == 0 {
            return Err(Error::invalid("batch_len", "must be at least 1"));
        }
        let pi = self.policy(theta)?;
        let w = self.step_weights(batch);
        let dists = self.state_distributions(theta, w.len())?;
        let na = self.n_actions;
        let mut grad = vec![0.0; self.param_dim()];
        for (wh, d) in w.iter().zip(&dists) {
            for s in 0..self.n_states {
                let mass = wh * d[s];
                if mass == 0.0 {
                    continue;
                }
                let probs = &pi[s * na..(s + 1) * na];
                let baseline: f64 = (0..na).map(|a| probs[a] * self.reward(s, a)).sum();
                // sum_a pi_a r_a (e_a - pi) = pi * (r - baseline)
                for a in 0..na {
                    grad[s * na + a] += mass * probs[a] * (self.reward(s, a) - baseline);
                }
            }
        }
        ParamVector::new(grad).map_err(|_| Error::NonFinite("reward_gradient"))
    }

    /// Samples `batch` transitions under `pi_theta` and returns them with the
    /// loss gradient `(1/P) sum_t -r_t grad log pi(s_t, a_t)`.
    pub fn rollout_minibatch(
        &self,
        theta: &ParamVector,
        batch: usize,
        rng: &mut RngStream,
    ) -> Result<(Vec<Transition>, ParamVector)> {
        if batch == 0 {
            return Err(Error::invalid("batch_len", "must be at least 1"));
        }
        let pi = self.policy(theta)?;
        let na = self.n_actions;
        let mut grad = vec![0.0; self.param_dim()];
        let mut batch_out = Vec::with_capacity(batch);
        let mut state = 0;
        for t in 0..batch {
            if t % self.horizon == 0 {
                state = rng.categorical(&self.initial);
            }
            let probs = &pi[state * na..(state + 1) * na];
            let action = rng.categorical(probs);
            let reward = self.reward(state, action);
            let next_state = rng.categorical(self.transition_row(state, action));
            // grad log pi(s, a) over the logits of s is e_a - pi(s, .)
            for b in 0..na {
                let score = f64::from(u8::from(b == action)) - probs[b];
                grad[state * na + b] -= reward * score;
            }
            batch_out.push(Transition {
                state,
                action,
                reward,
                next_state,
            });
            state = next_state;
        }
        let inv = 1.0 / batch as f64;
        for g in &mut grad {
            *g *= inv;
        }
        let grad = ParamVector::new(grad).map_err(|_| Error::NonFinite("rollout_minibatch"))?;
        Ok((batch_out, grad))
    }

    fn check_theta(&self, theta: &ParamVector) -> Result<()> {
        if theta.len() != self.param_dim() {
            return Err(Error::LengthMismatch {
                expected: self.param_dim(),
                actual: theta.len(),
            });
        }
        Ok(())
    }
}

pub fn rollout_minibatch(
    env: &MdpEnv,
    theta: &ParamVector,
    batch: usize,
    rng: &mut RngStream,
) -> Result<(Vec<Transition>, ParamVector)> {
    env.rollout_minibatch(theta, batch, rng)
}

fn check_distribution(probs: &[f64], name: &str) -> Result<()> {
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::invalid(name, "probabilities must be finite and non-negative"));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > ROW_TOL {
        return Err(Error::invalid(name, format!("probabilities sum to {sum}, not 1")));
    }
    Ok(())
}

fn normalized_draw(n: usize, rng: &mut RngStream) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.uniform() + 1e-3).collect();
    let z: f64 = raw.iter().sum();
    let mut out: Vec<f64> = raw.iter().map(|r| r / z).collect();
    // push the residual round-off into the largest entry
    let resid = 1.0 - out.iter().sum::<f64>();
    let imax = (0..n).max_by(|&i, &j| out[i].total_cmp(&out[j])).unwrap_or(0);
    out[imax] += resid;
    out
}
