use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::ParamVector;

/// One term `-weight * sigmoid(direction . theta + offset)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmoidComponent {
    pub direction: Vec<f64>,
    pub offset: f64,
    pub weight: f64,
}

/// Smooth non-convex objective `F(theta) = -sum_i w_i sigmoid(c_i . theta + o_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SumOfSigmoids {
    dim: usize,
    components: Vec<SigmoidComponent>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl SumOfSigmoids {
    pub fn new(components: Vec<SigmoidComponent>) -> Result<Self> {
        let Some(first) = components.first() else {
            return Err(Error::invalid("objective.components", "need at least one component"));
        };
        let dim = first.direction.len();
        if dim == 0 {
            return Err(Error::invalid("objective.components", "dimension must be at least 1"));
        }
        for c in &components {
            if c.direction.len() != dim {
                return Err(Error::LengthMismatch {
                    expected: dim,
                    actual: c.direction.len(),
                });
            }
            if c.direction.iter().chain([&c.offset, &c.weight]).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("SumOfSigmoids::new"));
            }
        }
        Ok(Self { dim, components })
    }

    /// A separable basin: along each axis the pair
    /// `-w [sigmoid(s x + o) + sigmoid(-s x + o)]`, minimized at `x = 0` for
    /// `o > 0` and flattening out far from the origin.
    pub fn wells(dim: usize, sharpness: f64, offset: f64, weight: f64) -> Result<Self> {
        let mut components = Vec::with_capacity(2 * dim);
        for axis in 0..dim {
            for sign in [1.0, -1.0] {
                let mut direction = vec![0.0; dim];
                direction[axis] = sign * sharpness;
                components.push(SigmoidComponent {
                    direction,
                    offset,
                    weight,
                });
            }
        }
        Self::new(components)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[SigmoidComponent] {
        &self.components
    }

    /// Certified upper bound `sum |w_i| ||c_i||^2 / 4` on the gradient's
    /// Lipschitz constant (`|sigmoid''| <= 1/4`).
    pub fn smoothness(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight.abs() * c.direction.iter().map(|v| v * v).sum::<f64>() / 4.0)
            .sum()
    }

    /// `-sum max(w_i, 0)`, below every value of `F`.
    pub fn lower_bound(&self) -> f64 {
        -self.components.iter().map(|c| c.weight.max(0.0)).sum::<f64>()
    }

    fn activation(&self, c: &SigmoidComponent, theta: &[f64]) -> f64 {
        c.direction.iter().zip(theta).map(|(a, x)| a * x).sum::<f64>() + c.offset
    }

    pub fn value(&self, theta: &ParamVector) -> Result<f64> {
        let t = theta.as_slice();
        let v: f64 = self
            .components
            .iter()
            .map(|c| -c.weight * sigmoid(self.activation(c, t)))
            .sum();
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite("SumOfSigmoids::value"))
        }
    }

    pub fn gradient(&self, theta: &ParamVector) -> Result<ParamVector> {
        let t = theta.as_slice();
        let mut g = vec![0.0; self.dim];
        for c in &self.components {
            let s = sigmoid(self.activation(c, t));
            let coef = -c.weight * s * (1.0 - s);
            for (gi, ci) in g.iter_mut().zip(&c.direction) {
                *gi += coef * ci;
            }
        }
        ParamVector::new(g).map_err(|_| Error::NonFinite("SumOfSigmoids::gradient"))
    }
}
