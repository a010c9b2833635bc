use rand::Rng;

use super::{l2_normalize_backward, Activation, Embedding, Linear, ModelError};

/// Two affine maps around one nonlinearity, followed by l2 normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionHead {
    pub activation: Activation,
    pub l1: Linear,
    pub l2: Linear,
}

#[derive(Debug, Clone)]
pub struct HeadTrace {
    input: Vec<f64>,
    hidden: Vec<f64>,
    /// Pre-normalization output.
    pub output: Vec<f64>,
}

impl ProjectionHead {
    pub fn init<R: Rng + ?Sized>(in_dim: usize, hidden: usize, out_dim: usize, activation: Activation, rng: &mut R) -> Self {
        Self { activation, l1: Linear::init(in_dim, hidden, true, rng), l2: Linear::init(hidden, out_dim, true, rng) }
    }

    pub fn zeros(in_dim: usize, hidden: usize, out_dim: usize, activation: Activation) -> Self {
        Self { activation, l1: Linear::zeros(in_dim, hidden, true), l2: Linear::zeros(hidden, out_dim, true) }
    }

    pub fn zeros_like(&self) -> Self {
        Self { activation: self.activation, l1: self.l1.zeros_like(), l2: self.l2.zeros_like() }
    }

    pub fn in_dim(&self) -> usize {
        self.l1.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.l2.out_dim
    }

    pub fn forward_trace(&self, input: &[f64]) -> Result<HeadTrace, ModelError> {
        if input.len() != self.in_dim() {
            return Err(ModelError::ShapeMismatch(format!("head expects {} inputs, got {}", self.in_dim(), input.len())));
        }
        let mut hidden = self.l1.forward(input);
        hidden.iter_mut().for_each(|v| *v = self.activation.apply(*v));
        let output = self.l2.forward(&hidden);
        Ok(HeadTrace { input: input.to_vec(), hidden, output })
    }

    /// Projects and l2-normalizes.
    pub fn project(&self, e: &Embedding) -> Result<Embedding, ModelError> {
        Ok(Embedding::l2_normalized(self.forward_trace(&e.values)?.output))
    }

    /// `d_z` is the gradient w.r.t. the normalized output. Returns the
    /// gradient w.r.t. the head input.
    pub fn backward(&self, trace: &HeadTrace, d_z: &[f64], grad: &mut ProjectionHead) -> Vec<f64> {
        let d_out = l2_normalize_backward(&trace.output, d_z);
        let mut d_hidden = vec![0.0; trace.hidden.len()];
        self.l2.backward(&trace.hidden, &d_out, &mut grad.l2, Some(&mut d_hidden));
        for (d, y) in d_hidden.iter_mut().zip(&trace.hidden) {
            *d *= self.activation.grad_from_output(*y);
        }
        let mut d_in = vec![0.0; trace.input.len()];
        self.l1.backward(&trace.input, &d_hidden, &mut grad.l1, Some(&mut d_in));
        d_in
    }

    pub(crate) fn tensors(&self) -> Vec<&[f64]> {
        [&self.l1, &self.l2].into_iter().flat_map(Linear::tensors).collect()
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        [&mut self.l1, &mut self.l2].into_iter().flat_map(Linear::tensors_mut).collect()
    }
}
