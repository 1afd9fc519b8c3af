//! Differentiable objectives with stochastic gradient oracles.
//!
//! Analytic objectives (quadratic, sum of sigmoids) draw
//! `g = grad F(theta) + z` with `z` zero-mean Gaussian and
//! `E||z||^2 = beta * ||grad F||^2 + sigma^2` holding with equality, so the
//! bounded-variance condition is tight. The tabular MDP draws REINFORCE-style
//! mini-batch gradients from actual rollouts instead.

mod mdp;
mod quadratic;
mod sigmoid;

pub use mdp::{rollout_minibatch, MdpEnv, Transition, MAX_ACTIONS, MAX_STATES};
pub use quadratic::Quadratic;
pub use sigmoid::{SigmoidComponent, SumOfSigmoids};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::vector::ParamVector;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub beta: f64,
    pub sigma_sq: f64,
}

impl NoiseModel {
    pub const NONE: NoiseModel = NoiseModel {
        beta: 0.0,
        sigma_sq: 0.0,
    };

    pub fn new(beta: f64, sigma_sq: f64) -> Result<Self> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::invalid("beta", "must be finite and non-negative"));
        }
        if !(sigma_sq >= 0.0 && sigma_sq.is_finite()) {
            return Err(Error::invalid("sigma_sq", "must be finite and non-negative"));
        }
        Ok(Self { beta, sigma_sq })
    }

    /// `E||g - grad F||^2` at a point with squared gradient norm `grad_norm_sq`.
    pub fn variance(&self, grad_norm_sq: f64) -> f64 {
        self.beta * grad_norm_sq + self.sigma_sq
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ObjectiveKind {
    Quadratic(Quadratic),
    SumOfSigmoids(SumOfSigmoids),
    /// Tabular softmax policy on a finite MDP; `batch_len` fixes the
    /// mini-batch size whose expected gradient is the full gradient.
    PolicyGradient { env: MdpEnv, batch_len: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Objective {
    pub kind: ObjectiveKind,
    pub noise: NoiseModel,
}

impl Objective {
    pub fn quadratic(q: Quadratic, noise: NoiseModel) -> Self {
        Self {
            kind: ObjectiveKind::Quadratic(q),
            noise,
        }
    }

    pub fn sigmoids(s: SumOfSigmoids, noise: NoiseModel) -> Self {
        Self {
            kind: ObjectiveKind::SumOfSigmoids(s),
            noise,
        }
    }

    pub fn policy_gradient(env: MdpEnv, batch_len: usize) -> Result<Self> {
        if batch_len == 0 {
            return Err(Error::invalid("batch_len", "must be at least 1"));
        }
        Ok(Self {
            kind: ObjectiveKind::PolicyGradient { env, batch_len },
            noise: NoiseModel::NONE,
        })
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            ObjectiveKind::Quadratic(q) => q.dim(),
            ObjectiveKind::SumOfSigmoids(s) => s.dim(),
            ObjectiveKind::PolicyGradient { env, .. } => env.param_dim(),
        }
    }

    pub fn value(&self, theta: &ParamVector) -> Result<f64> {
        self.check_dim(theta)?;
        match &self.kind {
            ObjectiveKind::Quadratic(q) => q.value(theta),
            ObjectiveKind::SumOfSigmoids(s) => s.value(theta),
            ObjectiveKind::PolicyGradient { env, batch_len } => {
                Ok(-env.expected_reward(theta, *batch_len)?)
            }
        }
    }

    /// Exact gradient of the minimized objective.
    pub fn full_gradient(&self, theta: &ParamVector) -> Result<ParamVector> {
        self.check_dim(theta)?;
        match &self.kind {
            ObjectiveKind::Quadratic(q) => q.gradient(theta),
            ObjectiveKind::SumOfSigmoids(s) => s.gradient(theta),
            ObjectiveKind::PolicyGradient { env, batch_len } => {
                env.reward_gradient(theta, *batch_len)?.scaled(-1.0)
            }
        }
    }

    /// One stochastic gradient at the configured mini-batch size.
    pub fn sample_gradient(&self, theta: &ParamVector, rng: &mut RngStream) -> Result<ParamVector> {
        match &self.kind {
            ObjectiveKind::PolicyGradient { batch_len, .. } => {
                self.minibatch_gradient(theta, *batch_len, rng)
            }
            _ => self.minibatch_gradient(theta, 0, rng),
        }
    }

    /// Stochastic gradient from a mini-batch of `batch` transitions. The
    /// analytic kinds carry their batch size in the noise model and ignore
    /// `batch`.
    pub fn minibatch_gradient(
        &self,
        theta: &ParamVector,
        batch: usize,
        rng: &mut RngStream,
    ) -> Result<ParamVector> {
        self.check_dim(theta)?;
        if let ObjectiveKind::PolicyGradient { env, .. } = &self.kind {
            let (_, g) = env.rollout_minibatch(theta, batch, rng)?;
            return Ok(g);
        }
        let grad = self.full_gradient(theta)?;
        let var = self.noise.variance(grad.norm_sq()?);
        if var == 0.0 {
            return Ok(grad);
        }
        let d = grad.len();
        let scale = (var / d as f64).sqrt();
        let noisy: Vec<f64> = grad
            .as_slice()
            .iter()
            .map(|g| g + scale * rng.standard_normal())
            .collect();
        ParamVector::new(noisy).map_err(|_| Error::NonFinite("sample_gradient"))
    }

    /// Lipschitz constant of the gradient when one is known.
    pub fn smoothness(&self) -> Option<f64> {
        match &self.kind {
            ObjectiveKind::Quadratic(q) => Some(q.smoothness()),
            ObjectiveKind::SumOfSigmoids(s) => Some(s.smoothness()),
            ObjectiveKind::PolicyGradient { .. } => None,
        }
    }

    /// A value `<= inf F`; exact for positive-definite quadratics.
    pub fn lower_bound(&self) -> Option<f64> {
        match &self.kind {
            ObjectiveKind::Quadratic(q) => q.infimum(),
            ObjectiveKind::SumOfSigmoids(s) => Some(s.lower_bound()),
            ObjectiveKind::PolicyGradient { env, .. } => Some(-env.max_reward()),
        }
    }

    fn check_dim(&self, theta: &ParamVector) -> Result<()> {
        if theta.len() != self.dim() {
            return Err(Error::LengthMismatch {
                expected: self.dim(),
                actual: theta.len(),
            });
        }
        Ok(())
    }
}

pub fn full_gradient(obj: &Objective, theta: &ParamVector) -> Result<ParamVector> {
    obj.full_gradient(theta)
}

pub fn sample_gradient(obj: &Objective, theta: &ParamVector, rng: &mut RngStream) -> Result<ParamVector> {
    obj.sample_gradient(theta, rng)
}
