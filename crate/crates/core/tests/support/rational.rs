//! Exact rational re-evaluation of the bound formulas, written directly from
//! their closed forms.

use std::ops::{Add, Div, Mul, Neg, Sub};

use fedsim::rng::RngStream;
use fedsim::theory::TheoryParams;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Exact fraction kept unreduced; only the final comparison normalizes.
#[derive(Clone, Debug)]
pub struct Q {
    num: BigInt,
    den: BigInt,
}

impl Q {
    fn new(num: BigInt, den: BigInt) -> Self {
        Self { num, den }
    }

    pub fn one() -> Self {
        Self::new(BigInt::one(), BigInt::one())
    }

    pub fn is_non_positive(&self) -> bool {
        (self.num.is_negative() != self.den.is_negative()) || self.num.is_zero()
    }
}

impl<'a> Add<&'a Q> for &'a Q {
    type Output = Q;
    fn add(self, o: &Q) -> Q {
        Q::new(&self.num * &o.den + &o.num * &self.den, &self.den * &o.den)
    }
}

impl<'a> Sub<&'a Q> for &'a Q {
    type Output = Q;
    fn sub(self, o: &Q) -> Q {
        Q::new(&self.num * &o.den - &o.num * &self.den, &self.den * &o.den)
    }
}

impl<'a> Mul<&'a Q> for &'a Q {
    type Output = Q;
    fn mul(self, o: &Q) -> Q {
        Q::new(&self.num * &o.num, &self.den * &o.den)
    }
}

impl<'a> Div<&'a Q> for &'a Q {
    type Output = Q;
    fn div(self, o: &Q) -> Q {
        Q::new(&self.num * &o.den, &self.den * &o.num)
    }
}

impl Neg for Q {
    type Output = Q;
    fn neg(self) -> Q {
        Q::new(-self.num, self.den)
    }
}

pub fn q(x: f64) -> Q {
    let r = BigRational::from_float(x).expect("finite input");
    Q::new(r.numer().clone(), r.denom().clone())
}

pub fn qi(n: usize) -> Q {
    Q::new(BigInt::from(n), BigInt::one())
}

fn pow(x: &Q, n: usize) -> Q {
    Q::new(x.num.pow(n as u32), x.den.pow(n as u32))
}

/// `n / d` as a float without normalizing the fraction.
fn ratio_f64(n: &BigInt, d: &BigInt) -> f64 {
    if n.is_zero() {
        return 0.0;
    }
    let top = |x: &BigInt| {
        let shift = x.bits().saturating_sub(64);
        ((x >> shift).to_f64().unwrap(), shift as i32)
    };
    let (nf, ns) = top(n);
    let (df, ds) = top(d);
    nf / df * 2f64.powi(ns - ds)
}

/// `|approx - exact| / |exact|`, or `|approx|` when `exact` is zero.
pub fn rel_err(approx: f64, exact: &Q) -> f64 {
    let a = q(approx);
    let diff = (&a.num * &exact.den - &exact.num * &a.den).abs();
    if exact.num.is_zero() {
        return approx.abs();
    }
    ratio_f64(&diff, &(&exact.num * &a.den).abs())
}

pub struct Exact {
    pub lr_lhs: Q,
    pub t1: Q,
    pub t2: Q,
    pub t4: Q,
    pub t5: Q,
}

pub fn evaluate(p: &TheoryParams) -> Exact {
    let (eta, l, beta, s2) = (q(p.eta), q(p.l), q(p.beta), q(p.sigma_sq));
    let m = qi(p.m);
    let tau = qi(p.tau);
    let one = Q::one();
    let two = qi(2);
    let el = &eta * &l;
    let el2 = &el * &el;
    let tau_p1 = &tau + &one;
    let lr_lhs = &(&(&el * &(&(&beta / &m) + &one)) - &one)
        + &(&(&(&(&two * &el2) * &tau) * &beta) + &(&(&el2 * &tau) * &tau_p1));
    let k_used = qi(p.k - p.k % p.tau);
    let init = &(&two * &q(p.delta_f)) / &(&eta * &k_used);
    let noise = &(&el * &s2) / &m;
    let head = &init + &noise;
    let scale = &el2 * &s2;

    let t1 = &head + &(&scale * &tau_p1);

    let nu = q(p.nu);
    let lin = &(&(&two * &tau) + &one) * &nu;
    let bracket2 = &(&lin - &(&nu * &nu)) - &q(p.omega_sq);
    let t2 = &head + &(&(&scale / &tau) * &bracket2);

    let lam = q(p.decay_lambda);
    let om = &one - &lam;
    let first = &tau / &om;
    let second = &(&two * &lam) / &(&om * &om);
    let third = &(&(&lam * &(&lam + &one)) * &(&one - &pow(&lam, p.tau))) / &(&tau * &pow(&om, 3));
    let bracket4 = &(&first - &second) + &third;
    let t4 = &head + &(&(&(&two * &scale) / &tau) * &bracket4);

    let rate = &q(p.eps) * &q(p.mu2);
    let contraction = pow(&(&one - &rate), 2 * p.rounds);
    let t5 = &head + &(&(&scale * &tau_p1) * &contraction);

    Exact { lr_lhs, t1, t2, t4, t5 }
}

/// Random in-range parameters with `0 < eps mu2 < 1` and `1 < nu <= tau`.
pub fn random_params(rng: &mut RngStream) -> TheoryParams {
    let tau = 2 + rng.below(19);
    let t = tau as f64;
    let mu2 = rng.uniform_range(0.05, 5.0);
    TheoryParams {
        l: rng.uniform_range(0.1, 10.0),
        beta: rng.uniform_range(0.0, 2.0),
        sigma_sq: rng.uniform_range(0.0, 5.0),
        m: 1 + rng.below(16),
        tau,
        eta: rng.uniform_range(1e-4, 0.05),
        nu: rng.uniform_range(1.0, t).max(1.0 + 1e-9),
        omega_sq: rng.uniform_range(0.0, (t - 1.0).powi(2) / 4.0),
        delta_f: rng.uniform_range(0.0, 10.0),
        k: tau * (1 + rng.below(500)) + rng.below(tau),
        mu2,
        eps: rng.uniform_range(0.01, 0.99) / mu2,
        rounds: rng.below(6),
        decay_lambda: rng.uniform_range(0.01, 0.99),
        spectral_rho: None,
    }
}
