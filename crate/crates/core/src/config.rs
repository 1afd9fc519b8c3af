//! Run configuration and the builders that turn it into simulation inputs.

use serde::{Deserialize, Serialize};

use crate::consensus::Topology;
use crate::error::{Error, Result};
use crate::objective::{MdpEnv, NoiseModel, Objective, Quadratic, SigmoidComponent, SumOfSigmoids};
use crate::rng::{RngStream, StreamPurpose};
use crate::scheduler::{TimingKind, TimingModel};
use crate::vector::ParamVector;

const RANDOM_TOPOLOGY_ATTEMPTS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "pavg")]
    PeriodicAvg,
    #[serde(rename = "decay")]
    Decay,
    #[serde(rename = "consensus")]
    Consensus,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::PeriodicAvg => "pavg",
            Method::Decay => "decay",
            Method::Consensus => "consensus",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pavg" => Ok(Method::PeriodicAvg),
            "decay" => Ok(Method::Decay),
            "consensus" => Ok(Method::Consensus),
            _ => Err(Error::invalid("method", format!("unknown method `{s}` (pavg, decay, consensus)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectiveShape {
    /// `0.5 theta' diag(diag) theta - offset' theta`; `diag` defaults to
    /// `dim` points evenly spaced on `[0.1, 1]`.
    Quadratic {
        #[serde(default = "default_dim")]
        dim: usize,
        diag: Option<Vec<f64>>,
        offset: Option<Vec<f64>>,
    },
    /// Symmetric sigmoid pairs along each axis, minimized at the origin.
    Wells {
        #[serde(default = "default_dim")]
        dim: usize,
        #[serde(default = "one")]
        sharpness: f64,
        #[serde(default = "one")]
        offset: f64,
        #[serde(default = "one")]
        weight: f64,
    },
    Sigmoids { components: Vec<SigmoidComponent> },
    Bandit { rewards: Vec<f64> },
    /// Random tabular MDP drawn from `env_seed`.
    Mdp {
        states: usize,
        actions: usize,
        horizon: usize,
        #[serde(default)]
        env_seed: u64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    #[serde(flatten)]
    pub shape: ObjectiveShape,
    #[serde(default)]
    pub beta: f64,
    #[serde(default = "one")]
    pub sigma_sq: f64,
    /// Initial parameters; all ones for analytic objectives and all zeros for
    /// policies when omitted.
    pub theta0: Option<Vec<f64>>,
}

impl Default for ObjectiveSpec {
    fn default() -> Self {
        Self {
            shape: ObjectiveShape::Quadratic {
                dim: default_dim(),
                diag: None,
                offset: None,
            },
            beta: 0.0,
            sigma_sq: 1.0,
            theta0: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimingName {
    #[default]
    Deterministic,
    Uniform,
    ShiftedExponential,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingSpec {
    pub kind: TimingName,
    /// Relative spread of the stochastic kinds.
    pub spread: f64,
    /// Mean step time per agent; overrides `tau_range`.
    pub means: Option<Vec<f64>>,
    /// `[lo, hi]` with `hi = tau`: budgets falling linearly from `hi` to `lo`.
    pub tau_range: Option<[usize; 2]>,
    /// Keep the first period's budgets for the whole run.
    pub freeze: bool,
}

impl Default for TimingSpec {
    fn default() -> Self {
        Self {
            kind: TimingName::Deterministic,
            spread: 0.1,
            means: None,
            tau_range: None,
            freeze: false,
        }
    }
}

impl TimingSpec {
    pub fn timing_kind(&self) -> TimingKind {
        match self.kind {
            TimingName::Deterministic => TimingKind::Deterministic,
            TimingName::Uniform => TimingKind::Uniform { spread: self.spread },
            TimingName::ShiftedExponential => TimingKind::ShiftedExponential { spread: self.spread },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TopologySpec {
    Path,
    Ring,
    Complete,
    /// Each slot proposes `k_lo..=k_hi` partners; drawn from the run seed.
    Random { k_lo: usize, k_hi: usize },
    Edges { edges: Vec<(usize, usize)> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub n_agents: usize,
    pub participants: usize,
    pub tau: usize,
    pub eta: f64,
    pub epochs: usize,
    pub epoch_len: usize,
    pub batch_len: usize,
    pub method: Method,
    pub decay_lambda: f64,
    pub consensus_eps: f64,
    pub consensus_rounds: usize,
    pub seed: u64,
    pub objective: ObjectiveSpec,
    pub timing: TimingSpec,
    pub topology: Option<TopologySpec>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_agents: 4,
            participants: 4,
            tau: 5,
            eta: 0.01,
            epochs: 10,
            epoch_len: 100,
            batch_len: 1,
            method: Method::PeriodicAvg,
            decay_lambda: 1.0,
            consensus_eps: default_eps(),
            consensus_rounds: default_rounds(),
            seed: 0,
            objective: ObjectiveSpec::default(),
            timing: TimingSpec::default(),
            topology: None,
        }
    }
}

fn default_dim() -> usize {
    10
}

fn one() -> f64 {
    1.0
}

fn default_eps() -> f64 {
    0.2
}

fn default_rounds() -> usize {
    1
}

fn check_positive(name: &str, v: usize) -> Result<()> {
    if v == 0 {
        return Err(Error::invalid(name, "must be a positive integer"));
    }
    Ok(())
}

impl RunConfig {
    /// Mini-batches per epoch, counting a trailing partial batch.
    pub fn batches_per_epoch(&self) -> usize {
        self.epoch_len.div_ceil(self.batch_len)
    }

    /// Virtual-agent iterations `K`.
    pub fn iterations(&self) -> usize {
        self.epochs * self.batches_per_epoch()
    }

    /// Enforces every structural constraint, including the consensus step
    /// bound `eps < 1 / (max degree + 1)`.
    pub fn validate(&self) -> Result<()> {
        check_positive("n_agents", self.n_agents)?;
        check_positive("participants", self.participants)?;
        check_positive("tau", self.tau)?;
        check_positive("epochs", self.epochs)?;
        check_positive("epoch_len", self.epoch_len)?;
        check_positive("batch_len", self.batch_len)?;
        if self.participants > self.n_agents {
            return Err(Error::invalid("participants", "must not exceed n_agents"));
        }
        if self.batch_len > self.epoch_len {
            return Err(Error::invalid("batch_len", "must not exceed epoch_len"));
        }
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::invalid("eta", "must be positive and finite"));
        }
        if self.method == Method::Decay && !(self.decay_lambda > 0.0 && self.decay_lambda <= 1.0) {
            return Err(Error::invalid("decay_lambda", "must lie in (0, 1]"));
        }
        if self.method == Method::Consensus {
            let topo = self.topology()?;
            let delta = topo.delta() as f64;
            if !(self.consensus_eps > 0.0 && self.consensus_eps < 1.0 / delta) {
                return Err(Error::invalid(
                    "consensus_eps",
                    format!(
                        "must satisfy 0 < eps < 1/Delta = {} (Delta = max degree + 1 = {delta})",
                        1.0 / delta
                    ),
                ));
            }
        }
        self.timing_model()?;
        let obj = self.objective()?;
        self.theta0(&obj)?;
        Ok(())
    }

    pub fn objective(&self) -> Result<Objective> {
        let spec = &self.objective;
        let noise = NoiseModel::new(spec.beta, spec.sigma_sq)?;
        match &spec.shape {
            ObjectiveShape::Quadratic { dim, diag, offset } => {
                let diag = match diag {
                    Some(d) => d.clone(),
                    None => linspace(0.1, 1.0, *dim),
                };
                let offset = offset.clone().unwrap_or_else(|| vec![0.0; diag.len()]);
                Ok(Objective::quadratic(Quadratic::diagonal(&diag, &offset)?, noise))
            }
            ObjectiveShape::Wells {
                dim,
                sharpness,
                offset,
                weight,
            } => Ok(Objective::sigmoids(
                SumOfSigmoids::wells(*dim, *sharpness, *offset, *weight)?,
                noise,
            )),
            ObjectiveShape::Sigmoids { components } => {
                Ok(Objective::sigmoids(SumOfSigmoids::new(components.clone())?, noise))
            }
            ObjectiveShape::Bandit { rewards } => {
                Objective::policy_gradient(MdpEnv::bandit(rewards)?, self.batch_len)
            }
            ObjectiveShape::Mdp {
                states,
                actions,
                horizon,
                env_seed,
            } => {
                let mut rng = RngStream::for_agent(*env_seed, StreamPurpose::Objective, 0);
                let env = MdpEnv::random(*states, *actions, *horizon, &mut rng)?;
                Objective::policy_gradient(env, self.batch_len)
            }
        }
    }

    pub fn theta0(&self, obj: &Objective) -> Result<ParamVector> {
        let is_policy = matches!(
            self.objective.shape,
            ObjectiveShape::Bandit { .. } | ObjectiveShape::Mdp { .. }
        );
        let values = match &self.objective.theta0 {
            Some(v) => v.clone(),
            None if is_policy => vec![0.0; obj.dim()],
            None => vec![1.0; obj.dim()],
        };
        if values.len() != obj.dim() {
            return Err(Error::invalid(
                "objective.theta0",
                format!("has length {}, objective dimension is {}", values.len(), obj.dim()),
            ));
        }
        ParamVector::new(values)
    }

    pub fn timing_model(&self) -> Result<TimingModel> {
        let t = &self.timing;
        let model = match (&t.means, t.tau_range) {
            (Some(means), _) => TimingModel::new(t.timing_kind(), means.clone())?,
            (None, Some([lo, hi])) => {
                if hi != self.tau {
                    return Err(Error::invalid("timing.tau_range", "upper end must equal tau"));
                }
                let base = TimingModel::linear_budgets(self.n_agents, lo, hi)?;
                TimingModel::new(t.timing_kind(), base.means)?
            }
            (None, None) => TimingModel::new(t.timing_kind(), vec![1.0; self.n_agents])?,
        };
        if model.n_agents() != self.n_agents {
            return Err(Error::invalid(
                "timing.means",
                format!("has {} entries, n_agents is {}", model.n_agents(), self.n_agents),
            ));
        }
        Ok(model)
    }

    /// Gossip graph over the `participants` slots; only consensus runs use one.
    pub fn topology(&self) -> Result<Topology> {
        let m = self.participants;
        let spec = self
            .topology
            .as_ref()
            .ok_or_else(|| Error::invalid("topology", "required when method = consensus"))?;
        let topo = match spec {
            TopologySpec::Path => Topology::path(m)?,
            TopologySpec::Ring => Topology::ring(m)?,
            TopologySpec::Complete => Topology::complete(m)?,
            TopologySpec::Random { k_lo, k_hi } => {
                let mut rng = RngStream::for_agent(self.seed, StreamPurpose::Topology, 0);
                Topology::random(m, *k_lo, *k_hi, &mut rng, RANDOM_TOPOLOGY_ATTEMPTS)?
            }
            TopologySpec::Edges { edges } => Topology::new(m, edges)?,
        };
        if m > 1 && !topo.is_connected() {
            return Err(Error::Disconnected);
        }
        Ok(topo)
    }
}

/// `n` evenly spaced points on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                lo * (1.0 - t) + hi * t
            })
            .collect(),
    }
}
