//! Per-node encoder inputs: `(x, y, z, radius, path length from soma)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::swc::MorphTree;

pub const NODE_FEATURE_DIM: usize = 5;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("z-score fit set is empty")]
    EmptyFitSet,
    #[error("feature rows ({rows}) do not match tree size ({nodes})")]
    LengthMismatch { rows: usize, nodes: usize },
}

/// One 5-vector per tree node, indexed like [`MorphTree`] nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeFeatures {
    pub rows: Vec<[f64; NODE_FEATURE_DIM]>,
}

/// Cumulative Euclidean edge length from the root to each node.
pub fn path_lengths(tree: &MorphTree) -> Vec<f64> {
    let mut out = vec![0.0; tree.len()];
    // Breadth-first storage: parents are finalized before children.
    for i in 1..tree.len() {
        let p = tree.parent(i).expect("non-root node has a parent");
        out[i] = out[p] + tree.edge_length(i);
    }
    out
}

pub fn compute_node_features(tree: &MorphTree) -> NodeFeatures {
    let paths = path_lengths(tree);
    let rows = tree.records().iter().zip(paths).map(|(r, pl)| [r.position[0], r.position[1], r.position[2], r.radius, pl]).collect();
    NodeFeatures { rows }
}

/// Population mean / std per feature column. A zero std is stored as 1 so
/// the column is centered but not scaled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZScoreStats {
    pub mean: [f64; NODE_FEATURE_DIM],
    pub std: [f64; NODE_FEATURE_DIM],
}

impl Default for ZScoreStats {
    fn default() -> Self {
        Self { mean: [0.0; NODE_FEATURE_DIM], std: [1.0; NODE_FEATURE_DIM] }
    }
}

impl ZScoreStats {
    /// Fits on every row of every feature set in `fit_set`.
    pub fn fit<'a>(fit_set: impl IntoIterator<Item = &'a NodeFeatures>) -> Result<Self, FeatureError> {
        let sets: Vec<&NodeFeatures> = fit_set.into_iter().collect();
        let n: usize = sets.iter().map(|s| s.rows.len()).sum();
        if n == 0 {
            return Err(FeatureError::EmptyFitSet);
        }
        let mut mean = [0.0; NODE_FEATURE_DIM];
        for row in sets.iter().flat_map(|s| &s.rows) {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = [0.0; NODE_FEATURE_DIM];
        for row in sets.iter().flat_map(|s| &s.rows) {
            for k in 0..NODE_FEATURE_DIM {
                let d = row[k] - mean[k];
                var[k] += d * d;
            }
        }
        let mut std = [1.0; NODE_FEATURE_DIM];
        for k in 0..NODE_FEATURE_DIM {
            let s = (var[k] / n as f64).sqrt();
            // Rounding in the mean leaves ~1e-16 residue on constant columns.
            if s > 1e-12 * mean[k].abs().max(1.0) {
                std[k] = s;
            }
        }
        Ok(Self { mean, std })
    }

    pub fn apply(&self, features: &NodeFeatures) -> NodeFeatures {
        let rows = features.rows.iter().map(|row| std::array::from_fn(|k| (row[k] - self.mean[k]) / self.std[k])).collect();
        NodeFeatures { rows }
    }
}

/// Fits on the selected members of `population` and normalizes all of them.
pub fn fit_and_apply_zscore(
    population: &[NodeFeatures],
    fit_selector: impl Fn(usize) -> bool,
) -> Result<(Vec<NodeFeatures>, ZScoreStats), FeatureError> {
    let stats = ZScoreStats::fit(population.iter().enumerate().filter(|(i, _)| fit_selector(*i)).map(|(_, f)| f))?;
    Ok((population.iter().map(|f| stats.apply(f)).collect(), stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::swc::{build_tree, SwcRecord};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    fn feats(rows: &[[f64; 5]]) -> NodeFeatures {
        NodeFeatures { rows: rows.to_vec() }
    }

    #[test]
    fn pythagorean_child() {
        let t = MorphTree::from_swc_str("1 1 0 0 0 1 -1\n2 3 3 4 0 1 1").unwrap();
        assert_eq!(compute_node_features(&t).rows[1][4], 5.0);
    }

    #[test]
    fn collinear_chain() {
        let t = MorphTree::from_swc_str("1 1 0 0 0 1 -1\n2 3 1 0 0 1 1\n3 3 2 0 0 1 2").unwrap();
        assert_eq!(path_lengths(&t), vec![0.0, 1.0, 2.0]);
    }

    /// Dijkstra over the undirected edge set, independent of the BFS accumulation.
    fn dijkstra(tree: &MorphTree) -> Vec<f64> {
        let n = tree.len();
        let mut adj = vec![Vec::new(); n];
        for i in 0..n {
            if let Some(p) = tree.parent(i) {
                let w = tree.edge_length(i);
                adj[i].push((p, w));
                adj[p].push((i, w));
            }
        }
        let mut dist = vec![f64::INFINITY; n];
        dist[0] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(Reverse((0u64, 0usize)));
        while let Some(Reverse((dbits, u))) = heap.pop() {
            let d = f64::from_bits(dbits);
            if d > dist[u] {
                continue;
            }
            for &(v, w) in &adj[u] {
                if d + w < dist[v] {
                    dist[v] = d + w;
                    heap.push(Reverse(((d + w).to_bits(), v)));
                }
            }
        }
        dist
    }

    #[test]
    fn random_tree_matches_dijkstra() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let mut recs = vec![SwcRecord::new(1, 1, [0.0; 3], 1.0, None)];
        for id in 2..=20u64 {
            let parent = rng.random_range(1..id);
            let pos = [rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0)];
            recs.push(SwcRecord::new(id, 3, pos, 1.0, Some(parent)));
        }
        let tree = build_tree(&recs).unwrap();
        let got = path_lengths(&tree);
        let want = dijkstra(&tree);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() <= 1e-9 * w.max(1.0), "{g} vs {w}");
        }
    }

    #[test]
    fn zscore_hand_values() {
        let f = feats(&[[0.0, 5.0, 0.0, 0.0, 0.0], [2.0, 5.0, 0.0, 0.0, 0.0]]);
        let (out, stats) = fit_and_apply_zscore(&[f], |_| true).unwrap();
        assert_eq!(stats.mean[0], 1.0);
        assert_eq!(stats.std[0], 1.0);
        assert_eq!(out[0].rows[0][0], -1.0);
        assert_eq!(out[0].rows[1][0], 1.0);
        // constant column: centered, not scaled
        assert_eq!(stats.std[1], 1.0);
        assert_eq!(out[0].rows[0][1], 0.0);
    }

    #[test]
    fn zscore_empty_fit_set() {
        let f = feats(&[[1.0; 5]]);
        assert!(matches!(fit_and_apply_zscore(&[f], |_| false), Err(FeatureError::EmptyFitSet)));
    }

    #[test]
    fn zscore_refit_idempotent_and_unit_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pop: Vec<NodeFeatures> = (0..4)
            .map(|_| NodeFeatures {
                rows: (0..30).map(|_| std::array::from_fn(|k| rng.random_range(-10.0..10.0) * (k + 1) as f64)).collect(),
            })
            .collect();
        let (a, _) = fit_and_apply_zscore(&pop, |_| true).unwrap();
        let (b, _) = fit_and_apply_zscore(&pop, |_| true).unwrap();
        assert_eq!(a, b);
        let all: Vec<[f64; 5]> = a.iter().flat_map(|f| f.rows.clone()).collect();
        for k in 0..5 {
            let n = all.len() as f64;
            let m = all.iter().map(|r| r[k]).sum::<f64>() / n;
            let s = (all.iter().map(|r| (r[k] - m).powi(2)).sum::<f64>() / n).sqrt();
            assert!(m.abs() < 1e-6 && (s - 1.0).abs() < 1e-6);
        }
    }
}
