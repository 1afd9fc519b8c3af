//! Closed-form learning-rate feasibility and convergence bounds.
//!
//! Every bound has the shape
//! `2 dF / (eta K) + eta L sigma^2 / m + local`, where the last term depends
//! on the update scheme:
//!
//! | scheme | local term |
//! |---|---|
//! | periodic averaging | `eta^2 L^2 sigma^2 (tau + 1)` |
//! | heterogeneous budgets | `(eta^2 L^2 sigma^2 / tau) (-nu^2 + (2 tau + 1) nu - omega^2)` |
//! | decay weighting | `(2 eta^2 L^2 sigma^2 / tau) B(lambda, tau)` |
//! | gradient gossip | `eta^2 L^2 sigma^2 (tau + 1) (1 - eps mu2)^(2E)` |
//!
//! with `B(lambda, tau) = tau/(1-lambda) - 2 lambda/(1-lambda)^2
//! + lambda (lambda+1)(1-lambda^tau) / (tau (1-lambda)^3)`, evaluated here as
//! the equivalent sum `(1/tau) sum_{j<tau} (tau-j)^2 lambda^j`.

use serde::{Deserialize, Serialize};

use crate::config::{Method, RunConfig};
use crate::consensus::{build_laplacian, LaplaceSpectrum};
use crate::error::{Error, Result};
use crate::scheduler::{compute_tau, nu_omega, TimingKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryParams {
    pub l: f64,
    pub beta: f64,
    pub sigma_sq: f64,
    pub m: usize,
    pub tau: usize,
    pub eta: f64,
    pub nu: f64,
    pub omega_sq: f64,
    /// `F(theta_0) - F_inf`.
    pub delta_f: f64,
    pub k: usize,
    pub mu2: f64,
    pub eps: f64,
    pub rounds: usize,
    pub decay_lambda: f64,
    /// `max_{i>=2} |1 - eps mu_i|` when the full spectrum is known.
    pub spectral_rho: Option<f64>,
}

impl Default for TheoryParams {
    fn default() -> Self {
        Self {
            l: 1.0,
            beta: 0.0,
            sigma_sq: 1.0,
            m: 4,
            tau: 5,
            eta: 0.01,
            nu: 5.0,
            omega_sq: 0.0,
            delta_f: 1.0,
            k: 1000,
            mu2: 1.0,
            eps: 0.2,
            rounds: 1,
            decay_lambda: 0.9,
            spectral_rho: None,
        }
    }
}

impl TheoryParams {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("beta", self.beta),
            ("sigma_sq", self.sigma_sq),
            ("eta", self.eta),
            ("omega_sq", self.omega_sq),
            ("delta_f", self.delta_f),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(name, "must be finite and non-negative"));
            }
        }
        if !(self.l.is_finite() && self.l > 0.0) {
            return Err(Error::invalid("l", "must be positive and finite"));
        }
        if self.m == 0 || self.tau == 0 || self.k == 0 {
            return Err(Error::invalid("m/tau/k", "must be positive integers"));
        }
        Ok(())
    }

    /// Copy with the heterogeneous-budget moments of budgets uniform on
    /// `1..=tau`.
    pub fn with_uniform_budgets(&self) -> Self {
        let (nu, omega_sq) = uniform_nu_omega(self.tau);
        Self {
            nu,
            omega_sq,
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub term_init: f64,
    pub term_noise: f64,
    pub term_local: f64,
    pub total: f64,
    pub feasible: bool,
    pub lr_lhs: f64,
    /// `K` rounded down to a multiple of `tau`.
    pub k_used: usize,
    pub warning: Option<String>,
    /// Local term with the spectral contraction `rho^(2E)` in place of
    /// `(1 - eps mu2)^(2E)` (gossip bound only).
    pub spectral_term_local: Option<f64>,
}

/// Moments used for budgets spread uniformly over `1..=tau`:
/// `((1 + tau) / 2, (tau - 1)^2 / 12)`.
pub fn uniform_nu_omega(tau: usize) -> (f64, f64) {
    let t = tau as f64;
    ((1.0 + t) / 2.0, (t - 1.0).powi(2) / 12.0)
}

/// `eta L (beta/m + 1) - 1 + 2 eta^2 L^2 tau beta + eta^2 L^2 tau (tau + 1)`
/// and whether it is `<= 0`.
pub fn lr_feasible(p: &TheoryParams) -> (bool, f64) {
    let el = p.eta * p.l;
    let tau = p.tau as f64;
    let lhs = el * (p.beta / p.m as f64 + 1.0) - 1.0
        + 2.0 * el * el * tau * p.beta
        + el * el * tau * (tau + 1.0);
    (lhs <= 0.0, lhs)
}

/// `(1/tau) sum_{j<tau} (tau - j)^2 lambda^j`.
pub fn decay_bracket(lambda: f64, tau: usize) -> f64 {
    let mut acc = 0.0;
    let mut pow = 1.0;
    for j in 0..tau {
        let c = (tau - j) as f64;
        acc += c * c * pow;
        pow *= lambda;
    }
    acc / tau as f64
}

/// `-nu^2 + (2 tau + 1) nu - omega^2`.
pub fn budget_bracket(nu: f64, omega_sq: f64, tau: usize) -> f64 {
    -nu * nu + (2.0 * tau as f64 + 1.0) * nu - omega_sq
}

fn base(p: &TheoryParams, term_local: f64) -> BoundReport {
    let (feasible, lr_lhs) = lr_feasible(p);
    let k_used = p.k - p.k % p.tau;
    let warning = (k_used != p.k).then(|| {
        format!("K = {} is not a multiple of tau = {}; using K = {k_used}", p.k, p.tau)
    });
    let term_init = 2.0 * p.delta_f / (p.eta * k_used as f64);
    let term_noise = p.eta * p.l * p.sigma_sq / p.m as f64;
    BoundReport {
        term_init,
        term_noise,
        term_local,
        total: term_init + term_noise + term_local,
        feasible,
        lr_lhs,
        k_used,
        warning,
        spectral_term_local: None,
    }
}

fn local_scale(p: &TheoryParams) -> f64 {
    p.eta * p.eta * p.l * p.l * p.sigma_sq
}

pub fn evaluate_t1(p: &TheoryParams) -> BoundReport {
    base(p, local_scale(p) * (p.tau as f64 + 1.0))
}

pub fn evaluate_t2(p: &TheoryParams) -> BoundReport {
    base(p, local_scale(p) * (budget_bracket(p.nu, p.omega_sq, p.tau) / p.tau as f64))
}

pub fn evaluate_t4(p: &TheoryParams) -> BoundReport {
    base(p, 2.0 * local_scale(p) / p.tau as f64 * decay_bracket(p.decay_lambda, p.tau))
}

pub fn evaluate_t5(p: &TheoryParams) -> BoundReport {
    let t1_local = local_scale(p) * (p.tau as f64 + 1.0);
    let factor = (1.0 - p.eps * p.mu2).powi(2 * p.rounds as i32);
    let mut r = base(p, t1_local * factor);
    r.spectral_term_local = p
        .spectral_rho
        .map(|rho| t1_local * rho.powi(2 * p.rounds as i32));
    r
}

fn checked(p: &TheoryParams, eval: fn(&TheoryParams) -> BoundReport) -> Result<BoundReport> {
    p.validate()?;
    if p.k < p.tau {
        return Err(Error::invalid("k", "must be at least tau"));
    }
    let r = eval(p);
    if !r.feasible {
        return Err(Error::InfeasibleStepSize { lhs: r.lr_lhs });
    }
    Ok(r)
}

/// Homogeneous periodic averaging.
pub fn bound_t1(p: &TheoryParams) -> Result<BoundReport> {
    checked(p, evaluate_t1)
}

/// Heterogeneous budgets with mean `nu` and variance `omega_sq`.
pub fn bound_t2(p: &TheoryParams) -> Result<BoundReport> {
    if !(p.nu > 1.0 && p.nu <= p.tau as f64) {
        return Err(Error::invalid("nu", "must satisfy 1 < nu <= tau"));
    }
    checked(p, evaluate_t2)
}

/// Decay weighting with `0 < lambda < 1`.
pub fn bound_t4(p: &TheoryParams) -> Result<BoundReport> {
    if !(p.decay_lambda > 0.0 && p.decay_lambda < 1.0) {
        return Err(Error::invalid(
            "decay_lambda",
            "must lie in (0, 1); use the heterogeneous-budget bound at lambda = 1",
        ));
    }
    checked(p, evaluate_t4)
}

/// Gradient gossip with `E` rounds at step `eps` over a graph with algebraic
/// connectivity `mu2`.
pub fn bound_t5(p: &TheoryParams) -> Result<BoundReport> {
    let rate = p.eps * p.mu2;
    if !(rate > 0.0 && rate < 1.0) {
        return Err(Error::invalid("eps", "need 0 < eps * mu2 < 1"));
    }
    checked(p, evaluate_t5)
}

/// Decay bound against the heterogeneous-budget bound at uniform budgets.
pub fn check_t3_ordering(p: &TheoryParams) -> bool {
    let decay = evaluate_t4(p).total;
    let uniform = evaluate_t2(&p.with_uniform_budgets()).total;
    decay <= uniform
}

/// Parameters for a run configuration, or `None` when the objective has no
/// known smoothness constant.
pub fn params_for_config(cfg: &RunConfig) -> Result<Option<TheoryParams>> {
    let obj = cfg.objective()?;
    let Some(l) = obj.smoothness() else {
        return Ok(None);
    };
    let theta0 = cfg.theta0(&obj)?;
    let delta_f = match obj.lower_bound() {
        Some(lb) => (obj.value(&theta0)? - lb).max(0.0),
        None => return Ok(None),
    };
    let timing = cfg.timing_model()?;
    let (nu, omega_sq) = match timing.kind {
        TimingKind::Deterministic => {
            let mut taus = compute_tau(cfg.tau, &timing.means)?;
            taus.truncate(cfg.participants);
            nu_omega(&taus)
        }
        _ => (cfg.tau as f64, 0.0),
    };
    let (mu2, spectral_rho) = match cfg.method {
        Method::Consensus if cfg.participants > 1 => {
            let spec: LaplaceSpectrum = build_laplacian(&cfg.topology()?)?;
            (spec.mu2, Some(spec.perron_rho(cfg.consensus_eps)))
        }
        _ => (0.0, None),
    };
    Ok(Some(TheoryParams {
        l: l.max(f64::MIN_POSITIVE),
        beta: cfg.objective.beta,
        sigma_sq: cfg.objective.sigma_sq,
        m: cfg.participants,
        tau: cfg.tau,
        eta: cfg.eta,
        nu,
        omega_sq,
        delta_f,
        k: cfg.iterations(),
        mu2,
        eps: cfg.consensus_eps,
        rounds: cfg.consensus_rounds,
        decay_lambda: cfg.decay_lambda,
        spectral_rho,
    }))
}

/// The bound matching a configuration's method, labelled by scheme.
pub fn bound_for_config(cfg: &RunConfig) -> Result<Option<(&'static str, BoundReport)>> {
    let Some(p) = params_for_config(cfg)? else {
        return Ok(None);
    };
    let out = match cfg.method {
        Method::PeriodicAvg if p.nu < p.tau as f64 || p.omega_sq > 0.0 => ("t2", evaluate_t2(&p)),
        Method::PeriodicAvg => ("t1", evaluate_t1(&p)),
        Method::Decay if cfg.decay_lambda < 1.0 => ("t4", evaluate_t4(&p)),
        Method::Decay => ("t2", evaluate_t2(&p.with_uniform_budgets())),
        Method::Consensus => ("t5", evaluate_t5(&p)),
    };
    Ok(Some(out))
}
