//! Dense tensors and named trainable parameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Row-major dense matrix. Vectors are `rows x 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// How a parameter is filled at registration time.
#[derive(Debug, Clone, Copy)]
pub enum Init {
    Zeros,
    Const(f64),
    /// Uniform in [-a, a].
    Uniform(f64),
}

/// A named trainable tensor with a gradient accumulator of the same shape.
#[derive(Debug, Clone)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
}

/// Handle to a parameter inside a [`ParamSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ParamId(pub(crate) usize);

/// Ordered collection of model parameters. Registration order is fixed, so
/// optimizer updates and checkpoints are deterministic.
#[derive(Debug, Clone, Default)]
pub struct ParamSet {
    params: Vec<Parameter>,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet { params: Vec::new() }
    }

    pub fn register(
        &mut self,
        name: &str,
        rows: usize,
        cols: usize,
        init: Init,
        rng: &mut SeededRng,
    ) -> ParamId {
        let mut value = Tensor::zeros(rows, cols);
        match init {
            Init::Zeros => {}
            Init::Const(c) => value.data.iter_mut().for_each(|v| *v = c),
            Init::Uniform(a) => value.data.iter_mut().for_each(|v| *v = rng.uniform(-a, a)),
        }
        let grad = Tensor::zeros(rows, cols);
        self.params.push(Parameter {
            name: name.to_string(),
            value,
            grad,
        });
        ParamId(self.params.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.params.iter_mut()
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.data.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    /// Total number of scalar entries across all parameters.
    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Error if any gradient entry is NaN or infinite.
    pub fn check_finite_grads(&self) -> Result<()> {
        for p in &self.params {
            if let Some(i) = p.grad.data.iter().position(|g| !g.is_finite()) {
                return Err(Error::NonFiniteGradient {
                    param: p.name.clone(),
                    index: i,
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registration_shapes_and_init() {
        let mut rng = SeededRng::new(1);
        let mut ps = ParamSet::new();
        let w = ps.register("w", 3, 4, Init::Uniform(0.08), &mut rng);
        let b = ps.register("b", 3, 1, Init::Const(1.0), &mut rng);
        assert_eq!(ps.get(w).value.len(), 12);
        assert!(ps.get(w).value.data.iter().all(|v| v.abs() <= 0.08));
        assert!(ps.get(b).value.data.iter().all(|&v| v == 1.0));
        assert_eq!(ps.get(w).grad.len(), ps.get(w).value.len());
    }

    #[test]
    fn finite_grad_check_flags_nan() {
        let mut rng = SeededRng::new(1);
        let mut ps = ParamSet::new();
        let w = ps.register("w", 2, 1, Init::Zeros, &mut rng);
        ps.get_mut(w).grad.data[1] = f64::NAN;
        assert!(ps.check_finite_grads().is_err());
    }
}
