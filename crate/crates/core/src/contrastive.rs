//! Symmetric InfoNCE with a learnable temperature, and a deterministic
//! gradient-descent training loop over paired (tree, image) views.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::{augment_diagram, AugmentConfig, AugmentError};
use crate::features::{compute_node_features, FeatureError, NodeFeatures, ZScoreStats};
use crate::nn::{dot, Checkpoint, Embedding, HeadTrace, ImageTrace, ModelDims, ModelError, ModelParams, Preprocess, TreeTrace};
use crate::pimage::{render_with_bounds, Bounds, BoundsMode, ImageConfig, ImageError, PersistenceImage};
use crate::rng::{diagram_rng, substream};
use crate::swc::MorphTree;
use crate::tmd::{ElderRuleConfig, PersistenceDiagram};

pub const TAU_MIN: f64 = 1e-3;
pub const TAU_MAX: f64 = 1e2;

#[derive(Debug, Error)]
pub enum ContrastiveError {
    #[error("non-finite value in {0}")]
    NonFiniteInput(&'static str),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("non-finite loss at step {step}: loss {loss}, tau {tau}, last grad norm {grad_norm}")]
    NonFiniteLoss { step: usize, loss: f64, tau: f64, grad_norm: f64 },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("finite-difference step must be positive, got {0}")]
    InvalidEpsilon(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

/// Loss value and its gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoNce {
    pub loss: f64,
    pub d_zt: Vec<Vec<f64>>,
    pub d_zv: Vec<Vec<f64>>,
    pub d_log_tau: f64,
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = values.clone().fold(f64::NEG_INFINITY, f64::max);
    m + values.map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Symmetric InfoNCE over `s_ij = <zt_i, zv_j> / tau`:
/// `L = -(1/2N) sum_i [log softmax_row(s)_ii + log softmax_col(s)_ii]`.
///
/// Row and column terms are accumulated separately and added once, so
/// exchanging the two modalities gives the identical value.
pub fn infonce_loss(zt: &[Vec<f64>], zv: &[Vec<f64>], log_tau: f64) -> Result<InfoNce, ContrastiveError> {
    let n = zt.len();
    if n == 0 {
        return Err(ContrastiveError::EmptyBatch);
    }
    if zv.len() != n {
        return Err(ContrastiveError::DimensionMismatch(format!("{n} tree vs {} image embeddings", zv.len())));
    }
    let d = zt[0].len();
    if let Some(bad) = zt.iter().chain(zv).find(|z| z.len() != d) {
        return Err(ContrastiveError::DimensionMismatch(format!("embedding dim {} vs {d}", bad.len())));
    }
    if !log_tau.is_finite() {
        return Err(ContrastiveError::NonFiniteInput("log_tau"));
    }
    if zt.iter().chain(zv).flatten().any(|v| !v.is_finite()) {
        return Err(ContrastiveError::NonFiniteInput("embeddings"));
    }
    let tau = log_tau.exp();
    let s: Vec<Vec<f64>> = zt.iter().map(|a| zv.iter().map(|b| dot(a, b) / tau).collect()).collect();
    let row_lse: Vec<f64> = (0..n).map(|i| log_sum_exp((0..n).map(|j| s[i][j]))).collect();
    let col_lse: Vec<f64> = (0..n).map(|j| log_sum_exp((0..n).map(|i| s[i][j]))).collect();
    let row_term: f64 = (0..n).map(|i| row_lse[i] - s[i][i]).sum();
    let col_term: f64 = (0..n).map(|i| col_lse[i] - s[i][i]).sum();
    let scale = 1.0 / (2.0 * n as f64);
    let loss = (row_term + col_term) * scale;

    // dL/ds_ij = (P_row - I + P_col - I) / 2N
    let mut g = vec![vec![0.0; n]; n];
    let mut d_log_tau = 0.0;
    for i in 0..n {
        for j in 0..n {
            let eye = if i == j { 2.0 } else { 0.0 };
            let gij = ((s[i][j] - row_lse[i]).exp() + (s[i][j] - col_lse[j]).exp() - eye) * scale;
            g[i][j] = gij;
            d_log_tau -= gij * s[i][j];
        }
    }
    let d_zt = (0..n).map(|i| (0..d).map(|k| (0..n).map(|j| g[i][j] * zv[j][k]).sum::<f64>() / tau).collect()).collect();
    let d_zv = (0..n).map(|j| (0..d).map(|k| (0..n).map(|i| g[i][j] * zt[i][k]).sum::<f64>() / tau).collect()).collect();
    Ok(InfoNce { loss, d_zt, d_zv, d_log_tau })
}

/// Optional learning-rate schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LrSchedule {
    #[default]
    Constant,
    /// Linear warmup to the base rate, then cosine decay to `min_lr`.
    WarmupCosine { warmup_steps: usize, min_lr: f64 },
}

impl LrSchedule {
    pub fn lr(&self, base: f64, step: usize, total: usize) -> f64 {
        match *self {
            LrSchedule::Constant => base,
            LrSchedule::WarmupCosine { warmup_steps, min_lr } => {
                if step < warmup_steps {
                    base * (step + 1) as f64 / warmup_steps as f64
                } else {
                    let span = total.saturating_sub(warmup_steps).max(1) as f64;
                    let t = ((step - warmup_steps) as f64 / span).min(1.0);
                    min_lr + 0.5 * (base - min_lr) * (1.0 + (std::f64::consts::PI * t).cos())
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Decoupled weight decay; never applied to `log_tau`.
    pub weight_decay: f64,
    pub steps: usize,
    pub seed: u64,
    pub augment: AugmentConfig,
    pub schedule: LrSchedule,
    /// Adaptive-optimizer moments and epoch counts of the full-scale recipe.
    /// Recorded for reference; the gradient-descent optimizer ignores them.
    pub adam_betas: [f64; 2],
    pub reference_epochs: usize,
    pub reference_warmup_epochs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 16,
            learning_rate: 5e-4,
            weight_decay: 0.05,
            steps: 200,
            seed: 0,
            augment: AugmentConfig::default(),
            schedule: LrSchedule::Constant,
            adam_betas: [0.9, 0.999],
            reference_epochs: 300,
            reference_warmup_epochs: 20,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ContrastiveError> {
        let bad = |m: &str| Err(ContrastiveError::InvalidConfig(m.to_string()));
        if self.batch_size < 2 {
            return bad("batch_size must be at least 2");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and non-negative");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight_decay must be finite and non-negative");
        }
        self.augment.validate()?;
        Ok(())
    }
}

/// One training log line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: usize,
    pub loss: f64,
    pub tau: f64,
    pub grad_norm: f64,
}

/// A neuron with its diagram and raw node features.
#[derive(Debug, Clone)]
pub struct Sample {
    pub id: String,
    pub tree: MorphTree,
    pub features: NodeFeatures,
    pub diagram: PersistenceDiagram,
}

impl Sample {
    pub fn new(id: impl Into<String>, tree: MorphTree) -> Self {
        let id = id.into();
        let diagram = PersistenceDiagram::from_tree(&tree, id.clone(), ElderRuleConfig::default());
        let features = compute_node_features(&tree);
        Self { id, tree, features, diagram }
    }
}

/// One aligned pair, ready for the encoders.
#[derive(Debug, Clone, Copy)]
pub struct PairView<'a> {
    pub tree: &'a MorphTree,
    /// Z-scored node features.
    pub features: &'a NodeFeatures,
    pub image: &'a PersistenceImage,
}

#[derive(Debug, Clone)]
struct PairTrace {
    tree: TreeTrace,
    tree_head: HeadTrace,
    image: ImageTrace,
    image_head: HeadTrace,
    zt: Vec<f64>,
    zv: Vec<f64>,
}

fn forward_pair(p: &ModelParams, v: &PairView) -> Result<PairTrace, ModelError> {
    let tree = p.tree.forward_trace(v.tree, v.features)?;
    let tree_head = p.tree_head.forward_trace(tree.root_hidden())?;
    let image = p.image.forward_trace(v.image)?;
    let image_head = p.image_head.forward_trace(&image.output)?;
    let zt = Embedding::l2_normalized(tree_head.output.clone()).values;
    let zv = Embedding::l2_normalized(image_head.output.clone()).values;
    Ok(PairTrace { tree, tree_head, image, image_head, zt, zv })
}

fn backward_pair(p: &ModelParams, v: &PairView, t: &PairTrace, d_zt: &[f64], d_zv: &[f64]) -> ModelParams {
    let mut g = p.zeros_like();
    let d_h = p.tree_head.backward(&t.tree_head, d_zt, &mut g.tree_head);
    p.tree.backward(v.tree, &t.tree, &d_h, &mut g.tree);
    let d_img = p.image_head.backward(&t.image_head, d_zv, &mut g.image_head);
    p.image.backward(&t.image, &d_img, &mut g.image);
    g
}

/// Batch loss and full parameter gradient. Per-pair passes run in parallel;
/// gradients are reduced in batch order so the result is schedule-independent.
pub fn loss_and_grad(p: &ModelParams, batch: &[PairView]) -> Result<(f64, ModelParams), ContrastiveError> {
    let traces: Vec<PairTrace> = batch.par_iter().map(|v| forward_pair(p, v)).collect::<Result<_, _>>()?;
    let zt: Vec<Vec<f64>> = traces.iter().map(|t| t.zt.clone()).collect();
    let zv: Vec<Vec<f64>> = traces.iter().map(|t| t.zv.clone()).collect();
    let nce = infonce_loss(&zt, &zv, p.log_tau)?;
    let grads: Vec<ModelParams> =
        (0..batch.len()).into_par_iter().map(|i| backward_pair(p, &batch[i], &traces[i], &nce.d_zt[i], &nce.d_zv[i])).collect();
    let mut total = p.zeros_like();
    for g in &grads {
        total.add_scaled(g, 1.0);
    }
    total.log_tau = nce.d_log_tau;
    Ok((nce.loss, total))
}

/// Batch loss only.
pub fn batch_loss(p: &ModelParams, batch: &[PairView]) -> Result<f64, ContrastiveError> {
    let out: Vec<(Vec<f64>, Vec<f64>)> = batch
        .par_iter()
        .map(|v| {
            let t = p.tree_head.forward_trace(&p.tree.forward(v.tree, v.features)?)?;
            let i = p.image_head.forward_trace(&p.image.forward(v.image)?)?;
            Ok((Embedding::l2_normalized(t.output).values, Embedding::l2_normalized(i.output).values))
        })
        .collect::<Result<_, ModelError>>()?;
    let (zt, zv): (Vec<_>, Vec<_>) = out.into_iter().unzip();
    Ok(infonce_loss(&zt, &zv, p.log_tau)?.loss)
}

/// Gradient step with decoupled weight decay on every tensor but `log_tau`,
/// which is then clamped so that `tau` stays in `[TAU_MIN, TAU_MAX]`.
pub fn apply_update(p: &mut ModelParams, grad: &ModelParams, lr: f64, weight_decay: f64) {
    let decay = lr * weight_decay;
    for (w, g) in p.tensors_mut().into_iter().zip(grad.tensors()) {
        for (x, dx) in w.iter_mut().zip(g) {
            *x -= lr * dx + decay * *x;
        }
    }
    p.log_tau = (p.log_tau - lr * grad.log_tau).clamp(TAU_MIN.ln(), TAU_MAX.ln());
}

/// Forward, backward and update on one batch. Returns the pre-update loss.
/// On a non-finite result `p` is left untouched.
pub fn train_step(p: &mut ModelParams, batch: &[PairView], lr: f64, weight_decay: f64, step: usize) -> Result<StepLog, ContrastiveError> {
    let (loss, grad) = loss_and_grad(p, batch)?;
    let grad_norm = grad.l2_norm();
    if !loss.is_finite() || !grad_norm.is_finite() {
        return Err(ContrastiveError::NonFiniteLoss { step, loss, tau: p.tau(), grad_norm });
    }
    let tau = p.tau();
    let mut next = p.clone();
    apply_update(&mut next, &grad, lr, weight_decay);
    if !next.is_finite() {
        return Err(ContrastiveError::NonFiniteLoss { step, loss, tau: next.tau(), grad_norm });
    }
    *p = next;
    Ok(StepLog { step, loss, tau, grad_norm })
}

/// Relative error `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Compares the analytic gradient with central differences at up to
/// `probes_per_tensor` random coordinates of every tensor, plus `log_tau`.
/// Returns the maximum relative error.
pub fn grad_check(p: &ModelParams, batch: &[PairView], epsilon: f64, probes_per_tensor: usize, seed: u64) -> Result<f64, ContrastiveError> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(ContrastiveError::InvalidEpsilon(epsilon));
    }
    let (_, grad) = loss_and_grad(p, batch)?;
    let mut rng = substream(seed, "gradcheck");
    let mut worst = 0.0f64;
    let n_tensors = p.tensors().len();
    for t in 0..n_tensors {
        let len = p.tensors()[t].len();
        if len == 0 {
            continue;
        }
        for _ in 0..probes_per_tensor.min(len) {
            let j = rng.random_range(0..len);
            let mut plus = p.clone();
            plus.tensors_mut()[t][j] += epsilon;
            let mut minus = p.clone();
            minus.tensors_mut()[t][j] -= epsilon;
            let fd = (batch_loss(&plus, batch)? - batch_loss(&minus, batch)?) / (2.0 * epsilon);
            worst = worst.max(relative_error(grad.tensors()[t][j], fd));
        }
    }
    let mut plus = p.clone();
    plus.log_tau += epsilon;
    let mut minus = p.clone();
    minus.log_tau -= epsilon;
    let fd = (batch_loss(&plus, batch)? - batch_loss(&minus, batch)?) / (2.0 * epsilon);
    Ok(worst.max(relative_error(grad.log_tau, fd)))
}

/// Fits preprocessing on the training samples: node-feature z-scores, and
/// frozen image bounds (taken from `image.bounds` when global, otherwise fit
/// on the training diagrams).
pub fn fit_preprocess(samples: &[Sample], image: ImageConfig) -> Result<Preprocess, ContrastiveError> {
    image.validate()?;
    let feature_stats = ZScoreStats::fit(samples.iter().map(|s| &s.features))?;
    let bounds = match image.bounds {
        BoundsMode::Global(b) => b,
        BoundsMode::PerImage => Bounds::from_diagrams(samples.iter().map(|s| &s.diagram)),
    };
    Ok(Preprocess { feature_stats, image: image.with_global_bounds(bounds) })
}

fn frozen_bounds(pre: &Preprocess, d: &PersistenceDiagram) -> Bounds {
    pre.image.resolve_bounds(d)
}

/// Unaugmented image for a diagram under frozen preprocessing.
pub fn render_clean(pre: &Preprocess, d: &PersistenceDiagram) -> PersistenceImage {
    render_with_bounds(d, &pre.image, &frozen_bounds(pre, d))
}

/// Backbone outputs and normalized projections for one neuron.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoded {
    pub tree_backbone: Embedding,
    pub image_backbone: Embedding,
    pub tree_projected: Embedding,
    pub image_projected: Embedding,
}

/// Encodes samples with frozen parameters, in parallel, preserving order.
pub fn encode(ck: &Checkpoint, samples: &[Sample]) -> Result<Vec<Encoded>, ContrastiveError> {
    let p = &ck.params;
    samples
        .par_iter()
        .map(|s| {
            let feats = ck.preprocess.feature_stats.apply(&s.features);
            let tb = Embedding::raw(p.tree.forward(&s.tree, &feats)?);
            let ib = Embedding::raw(p.image.forward(&render_clean(&ck.preprocess, &s.diagram))?);
            let tree_projected = p.tree_head.project(&tb)?;
            let image_projected = p.image_head.project(&ib)?;
            Ok(Encoded { tree_backbone: tb, image_backbone: ib, tree_projected, image_projected })
        })
        .collect()
}

/// Stateful training loop: epoch-shuffled batches, one freshly augmented
/// image view per pair per step.
pub struct Trainer {
    pub params: ModelParams,
    pub preprocess: Preprocess,
    pub config: TrainConfig,
    samples: Vec<Sample>,
    features: Vec<NodeFeatures>,
    clean: Vec<PersistenceImage>,
    order: Vec<usize>,
    cursor: usize,
    batch_rng: ChaCha8Rng,
    step: usize,
}

impl Trainer {
    /// Fits preprocessing, initializes parameters from `config.seed` and fits
    /// the image standardization on unaugmented training images. The image
    /// fields of `dims` are taken from `image`.
    pub fn new(samples: Vec<Sample>, mut dims: ModelDims, image: ImageConfig, config: TrainConfig) -> Result<Self, ContrastiveError> {
        config.validate()?;
        if samples.len() < config.batch_size {
            return Err(ContrastiveError::InvalidConfig(format!(
                "batch_size {} exceeds training set size {}",
                config.batch_size,
                samples.len()
            )));
        }
        let preprocess = fit_preprocess(&samples, image)?;
        dims.image_height = image.height;
        dims.image_width = image.width;
        dims.image_channels = image.channels.len();
        let mut params = ModelParams::init(config.seed, dims)?;
        let features = samples.iter().map(|s| preprocess.feature_stats.apply(&s.features)).collect();
        let clean: Vec<PersistenceImage> = samples.par_iter().map(|s| render_clean(&preprocess, &s.diagram)).collect();
        params.image.fit_standardization(&clean);
        let order = (0..samples.len()).collect();
        let batch_rng = substream(config.seed, "batch");
        let mut t = Self { params, preprocess, config, samples, features, clean, order, cursor: 0, batch_rng, step: 0 };
        t.reshuffle();
        Ok(t)
    }

    fn reshuffle(&mut self) {
        self.order.shuffle(&mut self.batch_rng);
        self.cursor = 0;
    }

    fn next_batch(&mut self) -> Vec<usize> {
        if self.cursor + self.config.batch_size > self.order.len() {
            self.reshuffle();
        }
        let b = self.order[self.cursor..self.cursor + self.config.batch_size].to_vec();
        self.cursor += self.config.batch_size;
        b
    }

    fn view(&self, i: usize, step: usize) -> Result<PersistenceImage, ContrastiveError> {
        let s = &self.samples[i];
        if self.config.augment.is_identity() {
            return Ok(self.clean[i].clone());
        }
        let mut rng = diagram_rng(self.config.augment.seed, &s.id, step as u64);
        let (d, _) = augment_diagram(&s.diagram, &self.config.augment, &mut rng)?;
        Ok(render_with_bounds(&d, &self.preprocess.image, &frozen_bounds(&self.preprocess, &d)))
    }

    pub fn steps_done(&self) -> usize {
        self.step
    }

    pub fn step(&mut self) -> Result<StepLog, ContrastiveError> {
        let step = self.step;
        let idx = self.next_batch();
        let images: Vec<PersistenceImage> = idx.par_iter().map(|&i| self.view(i, step)).collect::<Result<_, _>>()?;
        let batch: Vec<PairView> = idx
            .iter()
            .zip(&images)
            .map(|(&i, image)| PairView { tree: &self.samples[i].tree, features: &self.features[i], image })
            .collect();
        let lr = self.config.schedule.lr(self.config.learning_rate, step, self.config.steps);
        let log = train_step(&mut self.params, &batch, lr, self.config.weight_decay, step)?;
        self.step += 1;
        Ok(log)
    }

    /// Runs the remaining configured steps, reporting each log line.
    pub fn run(&mut self, mut on_step: impl FnMut(&StepLog)) -> Result<Vec<StepLog>, ContrastiveError> {
        let mut logs = Vec::with_capacity(self.config.steps.saturating_sub(self.step));
        while self.step < self.config.steps {
            let log = self.step()?;
            on_step(&log);
            logs.push(log);
        }
        Ok(logs)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint { params: self.params.clone(), preprocess: self.preprocess.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::synth::random_tree;

    fn orthonormal_pair() -> Vec<Vec<f64>> {
        vec![vec![1.0, 0.0], vec![0.0, 1.0]]
    }

    #[test]
    fn single_pair_has_zero_loss() {
        let z = vec![vec![0.6, 0.8]];
        assert_eq!(infonce_loss(&z, &z, 0.0).unwrap().loss, 0.0);
    }

    #[test]
    fn orthonormal_closed_form() {
        let z = orthonormal_pair();
        let l = infonce_loss(&z, &z, 0.0).unwrap().loss;
        assert!((l - (1.0 + (-1.0f64).exp()).ln()).abs() < 1e-12);
    }

    #[test]
    fn large_logits_do_not_overflow() {
        let z = orthonormal_pair();
        let out = infonce_loss(&z, &z, (1e-3f64).ln()).unwrap();
        assert!(out.loss.is_finite() && out.loss >= 0.0);
        assert!(out.d_zt.iter().flatten().all(|v| v.is_finite()));
    }

    #[test]
    fn rejects_bad_input() {
        let z = orthonormal_pair();
        assert!(matches!(infonce_loss(&z, &z[..1], 0.0), Err(ContrastiveError::DimensionMismatch(_))));
        let nan = vec![vec![f64::NAN, 0.0], vec![0.0, 1.0]];
        assert!(matches!(infonce_loss(&nan, &z, 0.0), Err(ContrastiveError::NonFiniteInput(_))));
    }

    #[test]
    fn loss_gradients_match_finite_differences() {
        let mut rng = substream(3, "z");
        let mk = |rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
            (0..4).map(|_| Embedding::l2_normalized((0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).values).collect()
        };
        let (zt, zv) = (mk(&mut rng), mk(&mut rng));
        let lt = 0.3f64.ln();
        let out = infonce_loss(&zt, &zv, lt).unwrap();
        let e = 1e-6;
        for i in 0..4 {
            for k in 0..3 {
                let (mut p, mut m) = (zt.clone(), zt.clone());
                p[i][k] += e;
                m[i][k] -= e;
                let fd = (infonce_loss(&p, &zv, lt).unwrap().loss - infonce_loss(&m, &zv, lt).unwrap().loss) / (2.0 * e);
                assert!((fd - out.d_zt[i][k]).abs() < 1e-8);
                let (mut p, mut m) = (zv.clone(), zv.clone());
                p[i][k] += e;
                m[i][k] -= e;
                let fd = (infonce_loss(&zt, &p, lt).unwrap().loss - infonce_loss(&zt, &m, lt).unwrap().loss) / (2.0 * e);
                assert!((fd - out.d_zv[i][k]).abs() < 1e-8);
            }
        }
        let fd = (infonce_loss(&zt, &zv, lt + e).unwrap().loss - infonce_loss(&zt, &zv, lt - e).unwrap().loss) / (2.0 * e);
        assert!((fd - out.d_log_tau).abs() < 1e-8);
    }

    #[test]
    fn schedule_shapes() {
        let s = LrSchedule::WarmupCosine { warmup_steps: 10, min_lr: 0.0 };
        assert!((s.lr(1.0, 0, 110) - 0.1).abs() < 1e-15);
        assert_eq!(s.lr(1.0, 9, 110), 1.0);
        assert!((s.lr(1.0, 10, 110) - 1.0).abs() < 1e-15);
        assert!(s.lr(1.0, 110, 110).abs() < 1e-15);
        assert_eq!(LrSchedule::Constant.lr(0.5, 99, 100), 0.5);
    }

    fn small_dims() -> ModelDims {
        ModelDims {
            tree_hidden: 4,
            patch: 8,
            patch_embed: 3,
            mix_hidden: 6,
            image_out: 5,
            proj_hidden: 5,
            proj_out: 4,
            ..Default::default()
        }
    }

    fn small_trainer(cfg: TrainConfig) -> Trainer {
        let mut rng = substream(1, "trees");
        let samples: Vec<Sample> = (0..6).map(|i| Sample::new(format!("n{i}"), random_tree(&mut rng, 8 + i))).collect();
        let image = ImageConfig { height: 16, width: 16, sigma: 2.0, ..Default::default() };
        Trainer::new(samples, small_dims(), image, cfg).unwrap()
    }

    #[test]
    fn zero_learning_rate_keeps_state() {
        let mut t = small_trainer(TrainConfig { batch_size: 3, learning_rate: 0.0, steps: 2, ..Default::default() });
        let before = t.params.clone();
        let log = t.step().unwrap();
        assert!(log.loss.is_finite());
        assert_eq!(t.params, before);
    }

    #[test]
    fn training_is_reproducible() {
        let cfg = TrainConfig { batch_size: 3, learning_rate: 0.05, steps: 4, ..Default::default() };
        let a = small_trainer(cfg.clone()).run(|_| {}).unwrap();
        let b = small_trainer(cfg).run(|_| {}).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn grad_check_rejects_zero_epsilon() {
        let t = small_trainer(TrainConfig { batch_size: 2, ..Default::default() });
        let batch: Vec<PairView> =
            (0..2).map(|i| PairView { tree: &t.samples[i].tree, features: &t.features[i], image: &t.clean[i] }).collect();
        assert!(matches!(grad_check(&t.params, &batch, 0.0, 3, 0), Err(ContrastiveError::InvalidEpsilon(_))));
        assert!(grad_check(&t.params, &batch, 1e-4, 3, 0).unwrap() < 1e-4);
    }
}
