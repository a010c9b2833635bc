//! Child-sum TreeLSTM evaluated leaves-first over a [`MorphTree`].
//!
//! Children are folded in a canonical order (lexicographic on their hidden
//! and cell states) rather than list order, so reordering a node's children
//! leaves every floating-point sum, and hence `h_root`, bit-identical.

use std::cmp::Ordering;

use rand::Rng;

use super::{sigmoid, Linear, ModelError};
use crate::features::{NodeFeatures, NODE_FEATURE_DIM};
use crate::swc::MorphTree;

#[derive(Debug, Clone, PartialEq)]
pub struct TreeLstm {
    pub hidden: usize,
    /// Input-side transform for the stacked (input, output, update) gates.
    pub w_iou: Linear,
    /// Child-sum transform for the stacked gates (no bias).
    pub u_iou: Linear,
    /// Input-side transform of the per-child forget gate.
    pub w_f: Linear,
    /// Per-child hidden transform of the forget gate (no bias).
    pub u_f: Linear,
}

/// Everything the backward pass needs from one forward evaluation.
#[derive(Debug, Clone)]
pub struct TreeTrace {
    /// Per node, children in the order they were folded.
    order: Vec<Vec<usize>>,
    x: Vec<[f64; NODE_FEATURE_DIM]>,
    hsum: Vec<Vec<f64>>,
    /// Activated gates per node: `[i | o | u]`.
    gates: Vec<Vec<f64>>,
    /// Forget gate each node received from its parent.
    forget: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
    h: Vec<Vec<f64>>,
}

impl TreeTrace {
    pub fn root_hidden(&self) -> &[f64] {
        &self.h[0]
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
}

fn canonical_children(tree: &MorphTree, v: usize, h: &[Vec<f64>], c: &[Vec<f64>]) -> Vec<usize> {
    let mut kids = tree.children(v).to_vec();
    kids.sort_by(|&a, &b| lex_cmp(&h[a], &h[b]).then_with(|| lex_cmp(&c[a], &c[b])));
    kids
}

impl TreeLstm {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            hidden,
            w_iou: Linear::zeros(NODE_FEATURE_DIM, 3 * hidden, true),
            u_iou: Linear::zeros(hidden, 3 * hidden, false),
            w_f: Linear::zeros(NODE_FEATURE_DIM, hidden, true),
            u_f: Linear::zeros(hidden, hidden, false),
        }
    }

    /// Uniform fan-in initialization; forget-gate bias starts at +1.
    pub fn init<R: Rng + ?Sized>(hidden: usize, rng: &mut R) -> Self {
        let mut w_f = Linear::init(NODE_FEATURE_DIM, hidden, true, rng);
        w_f.bias.iter_mut().for_each(|b| *b = 1.0);
        Self {
            hidden,
            w_iou: Linear::init(NODE_FEATURE_DIM, 3 * hidden, true, rng),
            u_iou: Linear::init(hidden, 3 * hidden, false, rng),
            w_f,
            u_f: Linear::init(hidden, hidden, false, rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.hidden)
    }

    fn check(&self, tree: &MorphTree, features: &NodeFeatures) -> Result<(), ModelError> {
        if features.rows.len() != tree.len() {
            return Err(ModelError::ShapeMismatch(format!("{} feature rows for {} nodes", features.rows.len(), tree.len())));
        }
        Ok(())
    }

    /// Gates `[i | o | u]` for input `x` and child-hidden sum `hsum`.
    fn gates(&self, x: &[f64], hsum: &[f64]) -> Vec<f64> {
        let d = self.hidden;
        let mut a = self.w_iou.forward(x);
        let mut ua = vec![0.0; 3 * d];
        self.u_iou.forward_into(hsum, &mut ua);
        for (k, (ak, uk)) in a.iter_mut().zip(&ua).enumerate() {
            let z = *ak + uk;
            *ak = if k < 2 * d { sigmoid(z) } else { z.tanh() };
        }
        a
    }

    fn forget_gate(&self, wx_f: &[f64], h_child: &[f64]) -> Vec<f64> {
        let uf = self.u_f.forward(h_child);
        wx_f.iter().zip(&uf).map(|(a, b)| sigmoid(a + b)).collect()
    }

    /// One node update with no children: `(c, h)` for input `x`.
    pub fn leaf_cell(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let d = self.hidden;
        let g = self.gates(x, &vec![0.0; d]);
        let c: Vec<f64> = (0..d).map(|k| g[k] * g[2 * d + k]).collect();
        let h = (0..d).map(|k| g[d + k] * c[k].tanh()).collect();
        (c, h)
    }

    fn run(&self, tree: &MorphTree, features: &NodeFeatures, keep: bool) -> (Vec<Vec<f64>>, Option<TreeTrace>) {
        let n = tree.len();
        let d = self.hidden;
        let mut h = vec![Vec::new(); n];
        let mut c = vec![Vec::new(); n];
        let mut trace = keep.then(|| TreeTrace {
            order: vec![Vec::new(); n],
            x: features.rows.clone(),
            hsum: vec![Vec::new(); n],
            gates: vec![Vec::new(); n],
            forget: vec![Vec::new(); n],
            c: Vec::new(),
            h: Vec::new(),
        });
        for v in (0..n).rev() {
            let x = &features.rows[v];
            let kids = canonical_children(tree, v, &h, &c);
            let mut hsum = vec![0.0; d];
            for &k in &kids {
                for (s, hk) in hsum.iter_mut().zip(&h[k]) {
                    *s += hk;
                }
            }
            let g = self.gates(x, &hsum);
            let mut cv: Vec<f64> = (0..d).map(|k| g[k] * g[2 * d + k]).collect();
            if !kids.is_empty() {
                let wx_f = self.w_f.forward(x);
                for &k in &kids {
                    let f = self.forget_gate(&wx_f, &h[k]);
                    for ((cj, fj), ck) in cv.iter_mut().zip(&f).zip(&c[k]) {
                        *cj += fj * ck;
                    }
                    if let Some(t) = trace.as_mut() {
                        t.forget[k] = f;
                    }
                }
            }
            h[v] = (0..d).map(|k| g[d + k] * cv[k].tanh()).collect();
            c[v] = cv;
            if let Some(t) = trace.as_mut() {
                t.order[v] = kids;
                t.hsum[v] = hsum;
                t.gates[v] = g;
            } else {
                // Children are no longer needed once their parent is done.
                for &k in tree.children(v) {
                    h[k] = Vec::new();
                    c[k] = Vec::new();
                }
            }
        }
        if let Some(t) = trace.as_mut() {
            t.h = h.clone();
            t.c = c;
        }
        (h, trace)
    }

    /// Root hidden state, unnormalized.
    pub fn forward(&self, tree: &MorphTree, features: &NodeFeatures) -> Result<Vec<f64>, ModelError> {
        self.check(tree, features)?;
        let (mut h, _) = self.run(tree, features, false);
        Ok(std::mem::take(&mut h[0]))
    }

    pub fn forward_trace(&self, tree: &MorphTree, features: &NodeFeatures) -> Result<TreeTrace, ModelError> {
        self.check(tree, features)?;
        Ok(self.run(tree, features, true).1.expect("trace requested"))
    }

    /// Backpropagates `d_root` (gradient w.r.t. `h_root`) through the tree,
    /// accumulating parameter gradients into `grad`.
    pub fn backward(&self, tree: &MorphTree, trace: &TreeTrace, d_root: &[f64], grad: &mut TreeLstm) {
        let n = tree.len();
        let d = self.hidden;
        let mut dh = vec![vec![0.0; d]; n];
        let mut dc = vec![vec![0.0; d]; n];
        dh[0].copy_from_slice(d_root);
        let mut dz = vec![0.0; 3 * d];
        let mut dhsum = vec![0.0; d];
        let mut dzf = vec![0.0; d];
        // Parents before children.
        for v in 0..n {
            let g = &trace.gates[v];
            let (i, o, u) = (&g[..d], &g[d..2 * d], &g[2 * d..]);
            let cv = &trace.c[v];
            let mut dcv = std::mem::take(&mut dc[v]);
            for k in 0..d {
                let tc = cv[k].tanh();
                let dho = dh[v][k];
                dcv[k] += dho * o[k] * (1.0 - tc * tc);
                let d_o = dho * tc;
                let d_i = dcv[k] * u[k];
                let d_u = dcv[k] * i[k];
                dz[k] = d_i * i[k] * (1.0 - i[k]);
                dz[d + k] = d_o * o[k] * (1.0 - o[k]);
                dz[2 * d + k] = d_u * (1.0 - u[k] * u[k]);
            }
            let x = &trace.x[v];
            self.w_iou.backward(x, &dz, &mut grad.w_iou, None);
            dhsum.iter_mut().for_each(|s| *s = 0.0);
            self.u_iou.backward(&trace.hsum[v], &dz, &mut grad.u_iou, Some(&mut dhsum));
            for &kid in &trace.order[v] {
                let f = &trace.forget[kid];
                let ck = &trace.c[kid];
                let mut dck = vec![0.0; d];
                for j in 0..d {
                    dck[j] = dcv[j] * f[j];
                    dzf[j] = dcv[j] * ck[j] * f[j] * (1.0 - f[j]);
                }
                self.w_f.backward(x, &dzf, &mut grad.w_f, None);
                let mut dhk = dhsum.clone();
                self.u_f.backward(&trace.h[kid], &dzf, &mut grad.u_f, Some(&mut dhk));
                dh[kid] = dhk;
                dc[kid] = dck;
            }
        }
    }

    pub(crate) fn tensors(&self) -> Vec<&[f64]> {
        [&self.w_iou, &self.u_iou, &self.w_f, &self.u_f].into_iter().flat_map(Linear::tensors).collect()
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        [&mut self.w_iou, &mut self.u_iou, &mut self.w_f, &mut self.u_f].into_iter().flat_map(Linear::tensors_mut).collect()
    }
}
