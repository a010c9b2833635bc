//! Toy-scale dual encoders with hand-written backpropagation.
//!
//! Everything is `f64` so that central finite differences can verify the
//! analytic gradients to tight tolerances.

mod head;
mod image;
mod model;
mod tree_lstm;

pub use head::{HeadTrace, ProjectionHead};
pub use image::{ImageEncoder, ImageTrace};
pub use model::{Checkpoint, ModelDims, ModelParams, Preprocess, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use tree_lstm::{TreeLstm, TreeTrace};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("malformed checkpoint: {0}")]
    MalformedCheckpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// A real vector produced by an encoder or projection head.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub values: Vec<f64>,
    /// Set when `values` has unit l2 norm. Zero vectors stay zero and unset.
    pub normalized: bool,
}

impl Embedding {
    pub fn raw(values: Vec<f64>) -> Self {
        Self { values, normalized: false }
    }

    pub fn l2_normalized(values: Vec<f64>) -> Self {
        let norm = l2_norm(&values);
        if norm > 0.0 && norm.is_finite() {
            Self { values: values.iter().map(|v| v / norm).collect(), normalized: true }
        } else {
            Self { values: vec![0.0; values.len()], normalized: false }
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.values)
    }
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gradient of `z = y / |y|` pulled back to `y`.
pub fn l2_normalize_backward(y: &[f64], dz: &[f64]) -> Vec<f64> {
    let norm = l2_norm(y);
    if norm == 0.0 {
        return vec![0.0; y.len()];
    }
    let z: Vec<f64> = y.iter().map(|v| v / norm).collect();
    let proj = dot(&z, dz);
    z.iter().zip(dz).map(|(zi, gi)| (gi - zi * proj) / norm).collect()
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Activation {
    #[default]
    Tanh,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation's output.
    pub fn grad_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

/// Affine map `y = W x + b` with `W` stored row-major as `out x in`.
/// An empty `bias` means the layer has none.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Linear {
    pub fn zeros(in_dim: usize, out_dim: usize, with_bias: bool) -> Self {
        Self { in_dim, out_dim, weight: vec![0.0; in_dim * out_dim], bias: if with_bias { vec![0.0; out_dim] } else { Vec::new() } }
    }

    /// Weights uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, zero bias.
    pub fn init<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, with_bias: bool, rng: &mut R) -> Self {
        let mut l = Self::zeros(in_dim, out_dim, with_bias);
        let bound = 1.0 / (in_dim as f64).sqrt();
        for w in &mut l.weight {
            *w = rng.random_range(-bound..=bound);
        }
        l
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.in_dim, self.out_dim, !self.bias.is_empty())
    }

    pub fn forward_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.in_dim);
        for (o, y) in out.iter_mut().enumerate() {
            let row = &self.weight[o * self.in_dim..(o + 1) * self.in_dim];
            *y = self.bias.get(o).copied().unwrap_or(0.0) + dot(row, x);
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.out_dim];
        self.forward_into(x, &mut out);
        out
    }

    /// Accumulates parameter gradients into `grad` and, if requested, adds
    /// `W^T dy` into `dx`.
    pub fn backward(&self, x: &[f64], dy: &[f64], grad: &mut Linear, dx: Option<&mut [f64]>) {
        for (o, &g) in dy.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let grow = &mut grad.weight[o * self.in_dim..(o + 1) * self.in_dim];
            for (gw, xi) in grow.iter_mut().zip(x) {
                *gw += g * xi;
            }
            if let Some(b) = grad.bias.get_mut(o) {
                *b += g;
            }
        }
        if let Some(dx) = dx {
            for (o, &g) in dy.iter().enumerate() {
                let row = &self.weight[o * self.in_dim..(o + 1) * self.in_dim];
                for (d, w) in dx.iter_mut().zip(row) {
                    *d += w * g;
                }
            }
        }
    }

    pub(crate) fn tensors(&self) -> Vec<&[f64]> {
        vec![&self.weight, &self.bias]
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.weight, &mut self.bias]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_zero_and_unit() {
        let z = Embedding::l2_normalized(vec![0.0; 4]);
        assert!(!z.normalized && z.values == vec![0.0; 4]);
        let e = Embedding::l2_normalized(vec![3.0, 4.0]);
        assert!(e.normalized);
        assert_eq!(e.values, vec![0.6, 0.8]);
    }

    #[test]
    fn normalize_backward_matches_finite_difference() {
        let y = [0.3, -1.2, 0.7];
        let dz = [0.5, 0.1, -0.4];
        let g = l2_normalize_backward(&y, &dz);
        let f = |y: &[f64]| dot(&Embedding::l2_normalized(y.to_vec()).values, &dz);
        for k in 0..3 {
            let (mut p, mut m) = (y, y);
            p[k] += 1e-6;
            m[k] -= 1e-6;
            let fd = (f(&p) - f(&m)) / 2e-6;
            assert!((fd - g[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn init_range_follows_fan_in() {
        let mut rng = crate::rng::substream(1, "t");
        let l = Linear::init(25, 40, true, &mut rng);
        assert!(l.weight.iter().all(|w| w.abs() <= 0.2));
        assert!(l.weight.iter().any(|w| w.abs() > 0.15));
        assert!(l.bias.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
    }
}
