//! Dense parameter vectors.
//!
//! Every [`ParamVector`] is non-empty and holds only finite entries. Operations
//! that would produce NaN or infinity return [`Error::NonFinite`] instead.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Model parameters or a gradient, `d >= 1` finite coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("ParamVector", "dimension must be at least 1"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("ParamVector::new"));
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "ParamVector dimension must be at least 1");
        Self(vec![0.0; dim])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    pub fn dot(&self, other: &Self) -> Result<f64> {
        check_len(self.len(), other.len())?;
        let s: f64 = self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum();
        finite(s, "ParamVector::dot")
    }

    pub fn norm_sq(&self) -> Result<f64> {
        finite(self.0.iter().map(|v| v * v).sum(), "vec_norm_sq")
    }

    /// `self <- self + alpha * x`.
    pub fn axpy_assign(&mut self, alpha: f64, x: &Self) -> Result<()> {
        check_len(self.len(), x.len())?;
        for (y, xv) in self.0.iter_mut().zip(&x.0) {
            *y += alpha * xv;
        }
        if self.0.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("vec_axpy"));
        }
        Ok(())
    }

    pub fn scaled(&self, alpha: f64) -> Result<Self> {
        let out: Vec<f64> = self.0.iter().map(|v| alpha * v).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("ParamVector::scaled"));
        }
        Ok(Self(out))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        vec_axpy(-1.0, other, self)
    }
}

impl TryFrom<Vec<f64>> for ParamVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<ParamVector> for Vec<f64> {
    fn from(v: ParamVector) -> Self {
        v.0
    }
}

impl std::ops::Index<usize> for ParamVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Returns `y + alpha * x`.
pub fn vec_axpy(alpha: f64, x: &ParamVector, y: &ParamVector) -> Result<ParamVector> {
    let mut out = y.clone();
    out.axpy_assign(alpha, x)?;
    Ok(out)
}

/// Squared Euclidean norm.
pub fn vec_norm_sq(x: &ParamVector) -> Result<f64> {
    x.norm_sq()
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::LengthMismatch { expected, actual });
    }
    Ok(())
}

fn finite(v: f64, what: &'static str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(what))
    }
}
