//! Synchronous gossip: one round multiplies the agents-by-coordinates
//! gradient matrix by the Perron matrix `P = I - eps * La`.

use super::topology::Topology;
use crate::error::{Error, Result};
use crate::vector::ParamVector;

/// `g'_i = g_i + eps * sum_{l in N(i)} (g_l - g_i)` for all agents at once,
/// reading only the previous round's values.
pub fn gossip_step(grads: &[ParamVector], topo: &Topology, eps: f64) -> Result<Vec<ParamVector>> {
    check_inputs(grads, topo, eps)?;
    let d = grads[0].len();
    let mut out = Vec::with_capacity(grads.len());
    for (i, gi) in grads.iter().enumerate() {
        let gi = gi.as_slice();
        let mut next = gi.to_vec();
        for (c, slot) in next.iter_mut().enumerate().take(d) {
            let diff: f64 = topo
                .neighbors(i)
                .iter()
                .map(|&l| grads[l].as_slice()[c] - gi[c])
                .sum();
            *slot += eps * diff;
        }
        out.push(ParamVector::new(next).map_err(|_| Error::NonFinite("gossip_step"))?);
    }
    Ok(out)
}

/// Applies [`gossip_step`] `rounds` times; zero rounds returns the input.
pub fn gossip_rounds(
    grads: &[ParamVector],
    topo: &Topology,
    eps: f64,
    rounds: usize,
) -> Result<Vec<ParamVector>> {
    check_inputs(grads, topo, eps)?;
    let mut cur = grads.to_vec();
    for _ in 0..rounds {
        cur = gossip_step(&cur, topo, eps)?;
    }
    Ok(cur)
}

/// Frobenius norm of the deviation of every agent's vector from the
/// agent-wise mean.
pub fn mean_deviation_norm(grads: &[ParamVector]) -> f64 {
    let n = grads.len() as f64;
    let d = grads[0].len();
    let mut total = 0.0;
    for c in 0..d {
        let mean = grads.iter().map(|g| g.as_slice()[c]).sum::<f64>() / n;
        total += grads
            .iter()
            .map(|g| (g.as_slice()[c] - mean).powi(2))
            .sum::<f64>();
    }
    total.sqrt()
}

fn check_inputs(grads: &[ParamVector], topo: &Topology, eps: f64) -> Result<()> {
    if grads.len() != topo.n() {
        return Err(Error::LengthMismatch {
            expected: topo.n(),
            actual: grads.len(),
        });
    }
    let d = grads[0].len();
    if let Some(g) = grads.iter().find(|g| g.len() != d) {
        return Err(Error::LengthMismatch {
            expected: d,
            actual: g.len(),
        });
    }
    let delta = topo.delta() as f64;
    if !(eps > 0.0 && eps < 1.0 / delta) {
        return Err(Error::invalid(
            "consensus_eps",
            format!("need 0 < eps < 1/delta = {} (delta = {delta}), got {eps}", 1.0 / delta),
        ));
    }
    Ok(())
}
