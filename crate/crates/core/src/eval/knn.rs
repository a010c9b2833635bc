use std::cmp::Ordering;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{accuracy, EvalError, LabeledEmbeddingSet};
use crate::nn::{dot, l2_norm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distance {
    /// `1 - cos`; a zero vector has cosine 0 with everything.
    #[default]
    Cosine,
    Euclidean,
}

impl Distance {
    pub fn eval(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Distance::Cosine => {
                let (na, nb) = (l2_norm(a), l2_norm(b));
                if na == 0.0 || nb == 0.0 {
                    1.0
                } else {
                    1.0 - dot(a, b) / (na * nb)
                }
            }
            Distance::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
        }
    }
}

impl FromStr for Distance {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "cosine" => Ok(Distance::Cosine),
            "euclidean" => Ok(Distance::Euclidean),
            _ => Err(format!("unknown distance '{s}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KnnResult {
    pub k: usize,
    pub predictions: Vec<usize>,
    /// Percent correct.
    pub accuracy: f64,
}

fn lex(a: &[f64], b: &[f64]) -> Ordering {
    a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
}

fn predict(train: &LabeledEmbeddingSet, q: &[f64], k: usize, metric: Distance, n_classes: usize) -> usize {
    let mut cand: Vec<(f64, usize)> = train.embeddings.iter().enumerate().map(|(i, e)| (metric.eval(q, &e.values), i)).collect();
    // Distance ties resolve by label, then by the vector itself, so the result
    // does not depend on training-set order.
    let key = |a: &(f64, usize), b: &(f64, usize)| {
        a.0.total_cmp(&b.0)
            .then(train.labels[a.1].cmp(&train.labels[b.1]))
            .then_with(|| lex(&train.embeddings[a.1].values, &train.embeddings[b.1].values))
    };
    if k < cand.len() {
        cand.select_nth_unstable_by(k - 1, key);
        cand.truncate(k);
    }
    cand.sort_by(key);
    let mut votes = vec![0usize; n_classes];
    let mut dist = vec![0.0f64; n_classes];
    for &(d, i) in &cand {
        votes[train.labels[i]] += 1;
        dist[train.labels[i]] += d;
    }
    (0..n_classes)
        .filter(|&c| votes[c] > 0)
        .min_by(|&a, &b| votes[b].cmp(&votes[a]).then((dist[a] / votes[a] as f64).total_cmp(&(dist[b] / votes[b] as f64))).then(a.cmp(&b)))
        .expect("k >= 1")
}

/// Majority vote over the `k` nearest training points. Ties between classes
/// go to the smaller mean distance, then the smaller class index.
pub fn knn_classify(train: &LabeledEmbeddingSet, test: &LabeledEmbeddingSet, k: usize, metric: Distance) -> Result<KnnResult, EvalError> {
    if train.is_empty() {
        return Err(EvalError::EmptyTrainSet);
    }
    if k == 0 {
        return Err(EvalError::ZeroK);
    }
    if k > train.len() {
        return Err(EvalError::KTooLarge { k, n: train.len() });
    }
    let dim = train.embeddings[0].dim();
    for e in train.embeddings.iter().chain(&test.embeddings) {
        if e.dim() != dim {
            return Err(EvalError::DimMismatch(dim, e.dim()));
        }
    }
    let n_classes = train.labels.iter().max().map_or(0, |m| m + 1);
    let predictions: Vec<usize> = test.embeddings.par_iter().map(|q| predict(train, &q.values, k, metric, n_classes)).collect();
    let accuracy = accuracy(&predictions, &test.labels);
    Ok(KnnResult { k, predictions, accuracy })
}

#[cfg(test)]
mod tests {
    use super::super::{Modality, Split};
    use super::*;
    use crate::nn::Embedding;

    fn set(v: &[(Vec<f64>, usize)], split: Split) -> LabeledEmbeddingSet {
        LabeledEmbeddingSet::new(
            v.iter().map(|(e, _)| Embedding::raw(e.clone())).collect(),
            v.iter().map(|(_, l)| *l).collect(),
            split,
            Modality::Tree,
        )
        .unwrap()
    }

    #[test]
    fn k1_identical_point() {
        let train = set(&[(vec![1.0, 0.0], 0), (vec![0.0, 1.0], 1), (vec![-1.0, 0.2], 2)], Split::Train);
        let test = set(&[(vec![0.0, 1.0], 1)], Split::Test);
        let r = knn_classify(&train, &test, 1, Distance::Cosine).unwrap();
        assert_eq!(r.predictions, vec![1]);
        assert_eq!(r.accuracy, 100.0);
    }

    #[test]
    fn k_equal_train_size_gives_majority() {
        let train =
            set(&[(vec![1.0, 0.0], 0), (vec![0.9, 0.1], 0), (vec![0.0, 1.0], 1), (vec![0.1, 0.9], 1), (vec![0.2, 0.8], 1)], Split::Train);
        let test = set(&[(vec![1.0, 0.0], 0), (vec![0.5, 0.5], 1)], Split::Test);
        assert_eq!(knn_classify(&train, &test, 5, Distance::Cosine).unwrap().predictions, vec![1, 1]);
    }

    #[test]
    fn vote_tie_goes_to_nearer_class() {
        let train = set(&[(vec![1.0, 0.0], 1), (vec![0.0, 1.0], 0)], Split::Train);
        let test = set(&[(vec![1.0, 0.1], 1)], Split::Test);
        assert_eq!(knn_classify(&train, &test, 2, Distance::Cosine).unwrap().predictions, vec![1]);
        // Exact tie on mean distance: smaller class index.
        let test = set(&[(vec![1.0, 1.0], 1)], Split::Test);
        assert_eq!(knn_classify(&train, &test, 2, Distance::Cosine).unwrap().predictions, vec![0]);
    }

    #[test]
    fn errors() {
        let train = set(&[(vec![1.0], 0)], Split::Train);
        let empty = set(&[], Split::Train);
        assert!(matches!(knn_classify(&empty, &train, 1, Distance::Cosine), Err(EvalError::EmptyTrainSet)));
        assert!(matches!(knn_classify(&train, &train, 2, Distance::Cosine), Err(EvalError::KTooLarge { .. })));
    }

    #[test]
    fn separated_clusters_are_perfect() {
        use rand::Rng;
        use rand_distr::StandardNormal;
        let mut rng = crate::rng::substream(9, "knn");
        let mut pts = |c: usize, n: usize| -> Vec<(Vec<f64>, usize)> {
            let centre = if c == 0 { [10.0, 0.0, 0.0] } else { [0.0, 10.0, 0.0] };
            (0..n).map(|_| (centre.iter().map(|m| m + rng.sample::<f64, _>(StandardNormal) * 0.1).collect(), c)).collect()
        };
        let mut tr = pts(0, 20);
        tr.extend(pts(1, 20));
        let mut te = pts(0, 10);
        te.extend(pts(1, 10));
        let r = knn_classify(&set(&tr, Split::Train), &set(&te, Split::Test), 5, Distance::Cosine).unwrap();
        assert_eq!(r.accuracy, 100.0);
    }
}
