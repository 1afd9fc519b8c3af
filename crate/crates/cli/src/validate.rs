//! Validator mode: averaged-gradient moment checks on the configured
//! objective and gossip checks on the configured graph.

use fedsim::consensus::{build_laplacian, gossip_rounds, gossip_step, mean_deviation_norm, Topology};
use fedsim::config::{Method, RunConfig};
use fedsim::objective::ObjectiveKind;
use fedsim::rng::{RngStream, StreamPurpose};
use fedsim::trainer::validators::{lemma1, lemma3};
use fedsim::ParamVector;
use serde::Serialize;

use crate::error::CliResult;

pub const VALIDATOR_DRAWS: usize = 100_000;
pub const VALIDATOR_AGENTS: [usize; 3] = [2, 4, 8];
const GOSSIP_TRIALS: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckLine {
    pub check: String,
    pub passed: bool,
    pub detail: String,
}

fn line(check: impl Into<String>, passed: bool, detail: impl Into<String>) -> CheckLine {
    CheckLine {
        check: check.into(),
        passed,
        detail: detail.into(),
    }
}

fn gossip_checks(topo: &Topology, eps: f64, seed: u64) -> CliResult<Vec<CheckLine>> {
    let spec = build_laplacian(topo)?;
    let rho = spec.perron_rho(eps);
    let mut rng = RngStream::for_agent(seed, StreamPurpose::Validator, 1 << 20);
    let mut worst_mean = 0.0f64;
    let mut worst_ratio = 0.0f64;
    let mut worst_limit = 0.0f64;
    for _ in 0..GOSSIP_TRIALS {
        let grads: Vec<ParamVector> = (0..topo.n())
            .map(|_| ParamVector::new((0..3).map(|_| rng.standard_normal()).collect()))
            .collect::<Result<_, _>>()?;
        let mean = |g: &[ParamVector], c: usize| g.iter().map(|v| v[c]).sum::<f64>() / g.len() as f64;
        let one = gossip_step(&grads, topo, eps)?;
        for c in 0..3 {
            let m0 = mean(&grads, c);
            worst_mean = worst_mean.max((mean(&one, c) - m0).abs() / m0.abs().max(1.0));
        }
        let before = mean_deviation_norm(&grads);
        if before > 0.0 {
            worst_ratio = worst_ratio.max(mean_deviation_norm(&one) / before);
        }
        let far = gossip_rounds(&grads, topo, eps, 200)?;
        for v in &far {
            for c in 0..3 {
                worst_limit = worst_limit.max((v[c] - mean(&grads, c)).abs());
            }
        }
    }
    Ok(vec![
        line("gossip_mean", worst_mean <= 1e-12, format!("max relative mean drift {worst_mean:e}")),
        line(
            "gossip_contraction",
            worst_ratio <= rho + 1e-9,
            format!("max per-round ratio {worst_ratio} vs rho {rho}"),
        ),
        line(
            "gossip_limit",
            worst_limit <= 1e-9 || rho.powi(200) > 1e-9,
            format!("max deviation after 200 rounds {worst_limit:e} (rho^200 = {:e})", rho.powi(200)),
        ),
        line("mu2", spec.mu2 > 0.0, format!("algebraic connectivity {}", spec.mu2)),
    ])
}

/// Runs all validators for `cfg`.
pub fn run_validators(cfg: &RunConfig) -> CliResult<Vec<CheckLine>> {
    let mut out = Vec::new();
    let obj = cfg.objective()?;
    let theta = cfg.theta0(&obj)?;
    if matches!(obj.kind, ObjectiveKind::PolicyGradient { .. }) {
        out.push(line("lemma", true, "skipped: rollout gradients have no closed-form moments"));
    } else {
        for m in VALIDATOR_AGENTS {
            for report in [
                lemma1(&obj, &theta, m, VALIDATOR_DRAWS, cfg.seed)?,
                lemma3(&obj, &theta, m, VALIDATOR_DRAWS, cfg.seed)?,
            ] {
                out.push(line(
                    format!("{}_m{m}", report.name),
                    report.passed(),
                    format!(
                        "estimate {} +/- {} vs bound {}",
                        report.estimate, report.std_err, report.bound
                    ),
                ));
            }
        }
    }
    let topo = match cfg.method {
        Method::Consensus => Some(cfg.topology()?),
        _ if cfg.participants >= 2 => Some(Topology::path(cfg.participants)?),
        _ => None,
    };
    if let Some(topo) = topo {
        let eps = match cfg.method {
            Method::Consensus => cfg.consensus_eps,
            _ => 0.5 / topo.delta() as f64,
        };
        out.extend(gossip_checks(&topo, eps, cfg.seed)?);
    }
    Ok(out)
}
