//! Frozen-embedding evaluation: kNN, fusion, retrieval, complementarity,
//! a morphometric baseline and the synthetic dataset generator.

mod complementarity;
mod fusion;
mod knn;
mod morphometrics;
mod report;
mod retrieval;
pub mod synth;

pub use complementarity::{complementarity, pca_pearson, rsa_spearman, spearman, ComplementarityReport, RsaResult};
pub use fusion::{fuse, FusionStrategy};
pub use knn::{knn_classify, Distance, KnnResult};
pub use morphometrics::{morphometrics, MORPHOMETRIC_NAMES};
pub use report::{predictions_csv, EvalReport, ModalityResult};
pub use retrieval::{recall_at_k, retrieve, RetrievalHit};
pub use synth::{generate_synthetic_dataset, SyntheticNeuron};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::Embedding;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("training set is empty")]
    EmptyTrainSet,
    #[error("k = {k} exceeds training set size {n}")]
    KTooLarge { k: usize, n: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("gallery is empty")]
    EmptyGallery,
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("invalid fusion strategy: {0}")]
    InvalidStrategy(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Tree,
    Image,
    Fused,
    Morphometric,
}

/// Embeddings with integer class labels in `[0, num_classes)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledEmbeddingSet {
    pub embeddings: Vec<Embedding>,
    pub labels: Vec<usize>,
    pub split: Split,
    pub modality: Modality,
}

impl LabeledEmbeddingSet {
    pub fn new(embeddings: Vec<Embedding>, labels: Vec<usize>, split: Split, modality: Modality) -> Result<Self, EvalError> {
        if embeddings.len() != labels.len() {
            return Err(EvalError::LengthMismatch(format!("{} embeddings, {} labels", embeddings.len(), labels.len())));
        }
        Ok(Self { embeddings, labels, split, modality })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.embeddings.first().map(Embedding::dim)
    }

    /// Subset in the given index order.
    pub fn select(&self, idx: &[usize], split: Split) -> Self {
        Self {
            embeddings: idx.iter().map(|&i| self.embeddings[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            split,
            modality: self.modality,
        }
    }
}

/// Accuracy in percent.
pub fn accuracy(pred: &[usize], labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let hits = pred.iter().zip(labels).filter(|(p, l)| p == l).count();
    100.0 * hits as f64 / labels.len() as f64
}

/// Seeded stratified split: `test_fraction` of each class goes to the test set.
/// Returns `(train, test)` index lists, each sorted.
pub fn stratified_split(labels: &[usize], test_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    use rand::seq::SliceRandom;
    let mut rng = crate::rng::substream(seed, "split");
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for c in 0..n_classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        idx.shuffle(&mut rng);
        let n_test = (idx.len() as f64 * test_fraction).round() as usize;
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_stratified_and_seeded() {
        let labels: Vec<usize> = (0..100).map(|i| i % 2).collect();
        let (tr, te) = stratified_split(&labels, 0.3, 4);
        assert_eq!(te.len(), 30);
        assert_eq!(tr.len(), 70);
        assert_eq!(te.iter().filter(|&&i| labels[i] == 0).count(), 15);
        assert_eq!((tr.clone(), te.clone()), stratified_split(&labels, 0.3, 4));
        let mut all: Vec<usize> = tr.into_iter().chain(te).collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }
}
