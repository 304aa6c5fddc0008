use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::Activation;
use crate::error::{config, shape};
use crate::{math, Result};

/// `y = activation(W x + b)` with `W` stored row-major as `(out_dim, in_dim)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    in_dim: usize,
    out_dim: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
    activation: Activation,
}

/// Glorot-uniform bound for a `(fan_out, fan_in)` matrix.
pub(crate) fn xavier_limit(fan_in: usize, fan_out: usize) -> f64 {
    math::sqrt(6.0 / (fan_in + fan_out) as f64)
}

pub(crate) fn xavier_fill<R: Rng + ?Sized>(out: &mut [f64], fan_in: usize, fan_out: usize, rng: &mut R) {
    let limit = xavier_limit(fan_in, fan_out);
    let dist = Uniform::new_inclusive(-limit, limit).expect("finite xavier bound");
    for w in out {
        *w = dist.sample(rng);
    }
}

impl DenseLayer {
    /// A layer with every weight and bias set to zero.
    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Result<Self> {
        Self::from_parts(in_dim, out_dim, vec![0.0; in_dim * out_dim], vec![0.0; out_dim], activation)
    }

    /// Glorot-uniform weights, zero bias.
    pub fn xavier<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let mut layer = Self::zeros(in_dim, out_dim, activation)?;
        xavier_fill(&mut layer.weights, in_dim, out_dim, rng);
        Ok(layer)
    }

    pub fn from_parts(
        in_dim: usize,
        out_dim: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(config("layer dimensions must be >= 1"));
        }
        if weights.len() != in_dim * out_dim || bias.len() != out_dim {
            return Err(shape("weights/bias lengths do not match layer dimensions"));
        }
        Ok(Self { in_dim, out_dim, weights, bias, activation })
    }

    #[inline]
    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    #[inline]
    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    #[inline]
    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub(crate) fn forward(&self, input: &[f64]) -> Vec<f64> {
        let mut out = self.bias.clone();
        for (o, row) in out.iter_mut().zip(self.weights.chunks_exact(self.in_dim)) {
            *o += math::dot(row, input);
        }
        self.activation.apply(&mut out);
        out
    }

    /// Accumulates `dW`, `db` into `grads` (weights then bias) and returns `dL/dx`.
    pub(crate) fn backward(&self, input: &[f64], output: &[f64], dy: &[f64], grads: &mut [f64]) -> Vec<f64> {
        let mut dz = vec![0.0; self.out_dim];
        self.activation.backprop(output, dy, &mut dz);
        let (gw, gb) = grads.split_at_mut(self.weights.len());
        let mut dx = vec![0.0; self.in_dim];
        for (r, &d) in dz.iter().enumerate() {
            gb[r] += d;
            if d == 0.0 {
                continue;
            }
            let row = &self.weights[r * self.in_dim..(r + 1) * self.in_dim];
            let grow = &mut gw[r * self.in_dim..(r + 1) * self.in_dim];
            for c in 0..self.in_dim {
                grow[c] += d * input[c];
                dx[c] += d * row[c];
            }
        }
        dx
    }
}
