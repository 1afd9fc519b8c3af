use serde::{Deserialize, Serialize};

use super::jacobi::symmetric_eigen;
use super::topology::Topology;
use crate::error::{Error, Result};

/// Laplace matrix `La = D - A` of a connected topology with its spectrum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaplaceSpectrum {
    pub n: usize,
    /// Row-major `n x n`.
    pub laplacian: Vec<f64>,
    /// Ascending; `eigenvalues[0]` is zero up to round-off.
    pub eigenvalues: Vec<f64>,
    /// Algebraic connectivity, the second-smallest eigenvalue.
    pub mu2: f64,
}

pub fn build_laplacian(topo: &Topology) -> Result<LaplaceSpectrum> {
    let n = topo.n();
    if n == 1 {
        return Err(Error::SingleNode);
    }
    if !topo.is_connected() {
        return Err(Error::Disconnected);
    }
    let mut la = vec![0.0; n * n];
    for i in 0..n {
        la[i * n + i] = topo.degree(i) as f64;
    }
    for &(i, l) in topo.edges() {
        la[i * n + l] = -1.0;
        la[l * n + i] = -1.0;
    }
    let eigen = symmetric_eigen(&la, n)?;
    let mu2 = eigen.values[1];
    if mu2 < 1e-9 {
        return Err(Error::Disconnected);
    }
    Ok(LaplaceSpectrum {
        n,
        laplacian: la,
        eigenvalues: eigen.values,
        mu2,
    })
}

impl LaplaceSpectrum {
    pub fn mu_max(&self) -> f64 {
        self.eigenvalues[self.n - 1]
    }

    /// `max_i |La_ii| + 1`, the same `delta` as [`Topology::delta`].
    pub fn delta(&self) -> f64 {
        (0..self.n)
            .map(|i| self.laplacian[i * self.n + i])
            .fold(0.0, f64::max)
            + 1.0
    }

    /// Largest Perron-matrix eigenvalue magnitude off the consensus
    /// direction: `max_{i >= 2} |1 - eps * mu_i|`.
    pub fn perron_rho(&self, eps: f64) -> f64 {
        self.eigenvalues[1..]
            .iter()
            .map(|mu| (1.0 - eps * mu).abs())
            .fold(0.0, f64::max)
    }

    /// `1 - eps * mu2`. Equals [`Self::perron_rho`] only while
    /// `eps * (mu2 + mu_max) <= 2`.
    pub fn mu2_rate(&self, eps: f64) -> f64 {
        1.0 - eps * self.mu2
    }
}

/// Squared operator-norm contraction after `rounds` gossip rounds,
/// `rho^(2 rounds)` with `rho = max_{i >= 2} |1 - eps * mu_i|`.
pub fn contraction_factor(spec: &LaplaceSpectrum, eps: f64, rounds: usize) -> f64 {
    spec.perron_rho(eps).powi(2 * rounds as i32)
}
