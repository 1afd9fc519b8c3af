use crate::consensus::symmetric_eigen;
use crate::error::{Error, Result};
use crate::vector::ParamVector;

/// `F(theta) = 1/2 theta^T A theta - b^T theta` with `A` symmetric PSD.
#[derive(Clone, Debug, PartialEq)]
pub struct Quadratic {
    dim: usize,
    /// Row-major `dim x dim`.
    matrix: Vec<f64>,
    offset: Vec<f64>,
    eigenvalues: Vec<f64>,
    infimum: Option<f64>,
}

impl Quadratic {
    pub fn new(matrix: Vec<f64>, offset: Vec<f64>) -> Result<Self> {
        let dim = offset.len();
        if dim == 0 {
            return Err(Error::invalid("objective.offset", "dimension must be at least 1"));
        }
        if matrix.len() != dim * dim {
            return Err(Error::LengthMismatch {
                expected: dim * dim,
                actual: matrix.len(),
            });
        }
        if offset.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Quadratic::new"));
        }
        let eigen = symmetric_eigen(&matrix, dim)?;
        let scale = eigen.values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        if eigen.values[0] < -1e-12 * scale {
            return Err(Error::invalid(
                "objective.matrix",
                format!("not positive semi-definite (smallest eigenvalue {})", eigen.values[0]),
            ));
        }
        if eigen.values[dim - 1] <= 0.0 {
            return Err(Error::invalid("objective.matrix", "curvature must be nonzero"));
        }
        // inf F = -1/2 sum (v_i^T b)^2 / mu_i, unbounded if b has a component
        // along a null direction.
        let mut infimum = Some(0.0);
        for (mu, v) in eigen.values.iter().zip(&eigen.vectors) {
            let proj: f64 = v.iter().zip(&offset).map(|(a, b)| a * b).sum();
            if *mu <= 1e-12 * scale {
                if proj.abs() > 1e-12 {
                    infimum = None;
                    break;
                }
            } else if let Some(f) = infimum.as_mut() {
                *f -= 0.5 * proj * proj / mu;
            }
        }
        Ok(Self {
            dim,
            matrix,
            offset,
            eigenvalues: eigen.values,
            infimum,
        })
    }

    pub fn diagonal(diag: &[f64], offset: &[f64]) -> Result<Self> {
        let d = diag.len();
        if offset.len() != d {
            return Err(Error::LengthMismatch {
                expected: d,
                actual: offset.len(),
            });
        }
        let mut m = vec![0.0; d * d];
        for (i, v) in diag.iter().enumerate() {
            m[i * d + i] = *v;
        }
        Self::new(m, offset.to_vec())
    }

    /// `F = 1/2 ||theta||^2`.
    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![1.0; dim], &vec![0.0; dim]).expect("identity is valid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Largest eigenvalue of `A`; tight Lipschitz constant of the gradient.
    pub fn smoothness(&self) -> f64 {
        self.eigenvalues[self.dim - 1]
    }

    pub fn infimum(&self) -> Option<f64> {
        self.infimum
    }

    pub fn value(&self, theta: &ParamVector) -> Result<f64> {
        let t = theta.as_slice();
        let mut quad = 0.0;
        for i in 0..self.dim {
            let row = &self.matrix[i * self.dim..(i + 1) * self.dim];
            quad += t[i] * row.iter().zip(t).map(|(a, x)| a * x).sum::<f64>();
        }
        let lin: f64 = self.offset.iter().zip(t).map(|(b, x)| b * x).sum();
        let v = 0.5 * quad - lin;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite("Quadratic::value"))
        }
    }

    pub fn gradient(&self, theta: &ParamVector) -> Result<ParamVector> {
        let t = theta.as_slice();
        let g: Vec<f64> = (0..self.dim)
            .map(|i| {
                let row = &self.matrix[i * self.dim..(i + 1) * self.dim];
                row.iter().zip(t).map(|(a, x)| a * x).sum::<f64>() - self.offset[i]
            })
            .collect();
        ParamVector::new(g).map_err(|_| Error::NonFinite("Quadratic::gradient"))
    }
}
