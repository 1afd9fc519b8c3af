//! Monte-Carlo checks of the averaged mini-batch gradient moments.
//!
//! With `m` agents all holding `theta`, let `G = (1/m) sum_i g_i` and
//! `H = grad F(theta)`. The bounded-variance condition gives
//!
//! - `E||G - H||^2 <= (beta / m^2) sum_i ||grad F||^2 + sigma^2 / m`,
//! - `E||G||^2 <= (beta / m^2 + 1 / m) sum_i ||grad F||^2 + sigma^2 / m`,
//!
//! and the analytic noise model attains both with equality.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::rng::{RngStream, StreamPurpose};
use crate::vector::ParamVector;

const SE_MULTIPLIER: f64 = 3.0;
const MATCH_TOLERANCE: f64 = 0.03;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidatorReport {
    pub name: String,
    pub m: usize,
    pub draws: usize,
    pub estimate: f64,
    pub std_err: f64,
    pub bound: f64,
    /// `estimate <= bound + 3 std_err`.
    pub within_bound: bool,
    /// `|estimate - bound| <= 3% of bound`.
    pub matches_bound: bool,
}

impl ValidatorReport {
    pub fn passed(&self) -> bool {
        self.within_bound && self.matches_bound
    }
}

fn check(m: usize, draws: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::invalid("m", "must be positive"));
    }
    if draws < 2 {
        return Err(Error::invalid("draws", "need at least 2"));
    }
    Ok(())
}

/// Draws `draws` averaged gradients and summarizes `stat(G)`.
fn simulate(
    obj: &Objective,
    theta: &ParamVector,
    m: usize,
    draws: usize,
    seed: u64,
    stat: impl Fn(&ParamVector) -> Result<f64>,
) -> Result<(f64, f64)> {
    let mut rngs: Vec<RngStream> = (0..m)
        .map(|i| RngStream::for_agent(seed, StreamPurpose::Validator, i))
        .collect();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let inv_m = 1.0 / m as f64;
    for _ in 0..draws {
        let mut avg = ParamVector::zeros(obj.dim());
        for rng in &mut rngs {
            let g = obj.sample_gradient(theta, rng)?;
            avg.axpy_assign(inv_m, &g)?;
        }
        let x = stat(&avg)?;
        sum += x;
        sum_sq += x * x;
    }
    let n = draws as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

fn report(name: &str, m: usize, draws: usize, (estimate, std_err): (f64, f64), bound: f64) -> ValidatorReport {
    ValidatorReport {
        name: name.to_string(),
        m,
        draws,
        estimate,
        std_err,
        bound,
        within_bound: estimate <= bound + SE_MULTIPLIER * std_err,
        matches_bound: (estimate - bound).abs() <= MATCH_TOLERANCE * bound,
    }
}

/// Variance of the averaged gradient.
pub fn lemma1(obj: &Objective, theta: &ParamVector, m: usize, draws: usize, seed: u64) -> Result<ValidatorReport> {
    check(m, draws)?;
    let h = obj.full_gradient(theta)?;
    let gn = h.norm_sq()?;
    let mf = m as f64;
    let bound = obj.noise.beta / (mf * mf) * mf * gn + obj.noise.sigma_sq / mf;
    let stats = simulate(obj, theta, m, draws, seed, |g| g.sub(&h)?.norm_sq())?;
    Ok(report("lemma1", m, draws, stats, bound))
}

/// Second moment of the averaged gradient.
pub fn lemma3(obj: &Objective, theta: &ParamVector, m: usize, draws: usize, seed: u64) -> Result<ValidatorReport> {
    check(m, draws)?;
    let gn = obj.full_gradient(theta)?.norm_sq()?;
    let mf = m as f64;
    let bound = (obj.noise.beta / (mf * mf) + 1.0 / mf) * mf * gn + obj.noise.sigma_sq / mf;
    let stats = simulate(obj, theta, m, draws, seed, |g| g.norm_sq())?;
    Ok(report("lemma3", m, draws, stats, bound))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{NoiseModel, Quadratic};

    #[test]
    fn equality_noise_attains_bounds() {
        let obj = Objective::quadratic(
            Quadratic::diagonal(&[0.5, 1.0, 2.0], &[0.0; 3]).unwrap(),
            NoiseModel::new(0.5, 1.0).unwrap(),
        );
        let theta = ParamVector::new(vec![1.0, -1.0, 0.5]).unwrap();
        for m in [1, 3] {
            let r1 = lemma1(&obj, &theta, m, 20_000, 9).unwrap();
            let r3 = lemma3(&obj, &theta, m, 20_000, 9).unwrap();
            assert!(r1.passed(), "{r1:?}");
            assert!(r3.passed(), "{r3:?}");
        }
    }

    #[test]
    fn noiseless_first_lemma_is_exactly_zero() {
        let obj = Objective::quadratic(Quadratic::identity(2), NoiseModel::NONE);
        let theta = ParamVector::new(vec![1.0, 2.0]).unwrap();
        let r = lemma1(&obj, &theta, 2, 10, 0).unwrap();
        assert_eq!((r.estimate, r.bound), (0.0, 0.0));
        assert!(lemma1(&obj, &theta, 0, 10, 0).is_err());
    }
}
