//! Topological morphology descriptor: elder-rule persistence pairs on a
//! filtered tree, enriched with branch persistence and mean radius.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::filtration::FiltrationMap;
use crate::swc::{MorphTree, NodeId};

#[derive(Debug, Error)]
pub enum TmdError {
    #[error("filtration map does not belong to this tree")]
    FiltrationTreeMismatch,
    #[error("node {death} is not an ancestor of leaf {leaf}")]
    NotAnAncestor { leaf: NodeId, death: NodeId },
    #[error("unknown node id {0}")]
    UnknownNode(NodeId),
    #[error("diagram csv line {line}: {reason}")]
    Csv { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A branch born at a leaf tip and dying where it merges into an elder branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersistencePair {
    pub birth: f64,
    pub death: f64,
    pub leaf_id: NodeId,
    pub death_node_id: NodeId,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnrichedPair {
    pub birth: f64,
    pub death: f64,
    /// `birth - death` as computed; augmentation may rescale it independently.
    pub delta: f64,
    pub mean_radius: f64,
}

impl EnrichedPair {
    /// Persistence coordinate used for image placement.
    pub fn persistence(&self) -> f64 {
        self.birth - self.death
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PersistenceDiagram {
    pub neuron_id: String,
    pub pairs: Vec<EnrichedPair>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ElderRuleConfig {
    /// Pair the global champion with the root, so that `#pairs == #leaves`.
    pub include_root_pair: bool,
}

impl Default for ElderRuleConfig {
    fn default() -> Self {
        Self { include_root_pair: true }
    }
}

/// Elder-rule pairing over a bottom-up sweep.
///
/// Every node carries the champion (highest-filtration leaf) of its subtree.
/// At a node with several children the champion with the largest value
/// survives, ties going to the smaller leaf id, and every other child
/// champion emits `(f(leaf), f(node))`.
pub fn elder_rule_pairs(tree: &MorphTree, f: &FiltrationMap, cfg: ElderRuleConfig) -> Result<Vec<PersistencePair>, TmdError> {
    if !f.matches(tree) {
        return Err(TmdError::FiltrationTreeMismatch);
    }
    let n = tree.len();
    let id = |i: usize| tree.record(i).id;
    let mut champion = vec![usize::MAX; n];
    let mut pairs = Vec::with_capacity(tree.leaf_count());
    // Breadth-first storage reversed: every child precedes its parent.
    for v in (0..n).rev() {
        let kids = tree.children(v);
        if kids.is_empty() {
            champion[v] = v;
            continue;
        }
        let best = kids
            .iter()
            .map(|&c| champion[c])
            .reduce(|a, b| {
                let (fa, fb) = (f.get(a), f.get(b));
                if fb > fa || (fb == fa && id(b) < id(a)) {
                    b
                } else {
                    a
                }
            })
            .expect("non-empty children");
        for &c in kids {
            let leaf = champion[c];
            if leaf != best {
                pairs.push(PersistencePair { birth: f.get(leaf), death: f.get(v), leaf_id: id(leaf), death_node_id: id(v) });
            }
        }
        champion[v] = best;
    }
    if cfg.include_root_pair {
        let root = tree.root();
        let leaf = champion[root];
        pairs.push(PersistencePair { birth: f.get(leaf), death: f.get(root), leaf_id: id(leaf), death_node_id: id(root) });
    }
    Ok(pairs)
}

/// Adds `delta = b - d` and the mean radius over the leaf-to-death-node path
/// (both endpoints included).
pub fn enrich_pairs(tree: &MorphTree, pairs: &[PersistencePair], neuron_id: impl Into<String>) -> Result<PersistenceDiagram, TmdError> {
    let mut out = Vec::with_capacity(pairs.len());
    for p in pairs {
        let leaf = tree.index_of(p.leaf_id).ok_or(TmdError::UnknownNode(p.leaf_id))?;
        let death = tree.index_of(p.death_node_id).ok_or(TmdError::UnknownNode(p.death_node_id))?;
        let not_ancestor = || TmdError::NotAnAncestor { leaf: p.leaf_id, death: p.death_node_id };
        let mut sum = 0.0;
        let mut count = 0usize;
        let mut cur = leaf;
        loop {
            sum += tree.record(cur).radius;
            count += 1;
            if cur == death {
                break;
            }
            cur = tree.parent(cur).ok_or_else(not_ancestor)?;
        }
        out.push(EnrichedPair { birth: p.birth, death: p.death, delta: p.birth - p.death, mean_radius: sum / count as f64 });
    }
    Ok(PersistenceDiagram { neuron_id: neuron_id.into(), pairs: out })
}

impl PersistenceDiagram {
    /// Full pipeline from a parsed tree: filtration, elder rule, enrichment.
    pub fn from_tree(tree: &MorphTree, neuron_id: impl Into<String>, cfg: ElderRuleConfig) -> Self {
        let f = crate::filtration::compute_filtration(tree);
        let pairs = elder_rule_pairs(tree, &f, cfg).expect("filtration computed on the same tree");
        enrich_pairs(tree, &pairs, neuron_id).expect("elder-rule death nodes are ancestors")
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("birth,death,delta,mean_radius\n");
        for p in &self.pairs {
            let _ = writeln!(out, "{},{},{},{}", p.birth, p.death, p.delta, p.mean_radius);
        }
        out
    }

    pub fn from_csv(text: &str, neuron_id: impl Into<String>) -> Result<Self, TmdError> {
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if (i == 0 && line.starts_with("birth")) || line.is_empty() {
                continue;
            }
            let err = |reason: String| TmdError::Csv { line: i + 1, reason };
            let vals = line
                .split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|_| err(format!("bad number {s:?}"))))
                .collect::<Result<Vec<_>, _>>()?;
            let [birth, death, delta, mean_radius] = vals[..] else {
                return Err(err(format!("expected 4 columns, found {}", vals.len())));
            };
            pairs.push(EnrichedPair { birth, death, delta, mean_radius });
        }
        Ok(Self { neuron_id: neuron_id.into(), pairs })
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_csv())
    }

    /// Reads a diagram CSV; the neuron id is the file stem.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self, TmdError> {
        let path = path.as_ref();
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        Self::from_csv(&std::fs::read_to_string(path)?, stem)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filtration::compute_filtration;

    fn bd(pairs: &[PersistencePair]) -> Vec<(f64, f64)> {
        let mut v: Vec<_> = pairs.iter().map(|p| (p.birth, p.death)).collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    #[test]
    fn single_edge_tree() {
        let t = MorphTree::from_swc_str("1 1 0 0 0 1 -1\n2 3 10 0 0 1 1").unwrap();
        let p = elder_rule_pairs(&t, &compute_filtration(&t), ElderRuleConfig::default()).unwrap();
        assert_eq!(bd(&p), vec![(10.0, 0.0)]);
        assert_eq!((p[0].leaf_id, p[0].death_node_id), (2, 1));
    }

    #[test]
    fn bifurcation_example() {
        // root(f=0) -> bif(f=2) -> {leafA(f=10), leafB(f=6)}
        let t = MorphTree::from_swc_str("1 1 0 0 0 1 -1\n2 3 2 0 0 1 1\n3 3 10 0 0 1 2\n4 3 0 6 0 1 2").unwrap();
        let p = elder_rule_pairs(&t, &compute_filtration(&t), ElderRuleConfig::default()).unwrap();
        assert_eq!(bd(&p), vec![(6.0, 2.0), (10.0, 0.0)]);
        let without = elder_rule_pairs(&t, &compute_filtration(&t), ElderRuleConfig { include_root_pair: false }).unwrap();
        assert_eq!(bd(&without), vec![(6.0, 2.0)]);
    }

    #[test]
    fn champion_tie_goes_to_smaller_leaf_id() {
        let t = MorphTree::from_swc_str("1 1 0 0 0 1 -1\n9 3 5 0 0 1 1\n4 3 0 5 0 1 1").unwrap();
        let p = elder_rule_pairs(&t, &compute_filtration(&t), ElderRuleConfig::default()).unwrap();
        assert_eq!(p[0].leaf_id, 9);
        assert_eq!((p[0].birth, p[0].death), (5.0, 0.0));
        assert_eq!(p[1].leaf_id, 4);
    }

    #[test]
    fn single_node_tree_yields_zero_pair() {
        let t = MorphTree::from_swc_str("1 1 0 0 0 2 -1").unwrap();
        let d = PersistenceDiagram::from_tree(&t, "n", ElderRuleConfig::default());
        assert_eq!(d.pairs, vec![EnrichedPair { birth: 0.0, death: 0.0, delta: 0.0, mean_radius: 2.0 }]);
    }

    #[test]
    fn mismatched_filtration() {
        let a = MorphTree::from_swc_str("1 1 0 0 0 1 -1\n2 3 10 0 0 1 1").unwrap();
        let b = MorphTree::from_swc_str("1 1 0 0 0 1 -1").unwrap();
        assert!(matches!(elder_rule_pairs(&a, &compute_filtration(&b), ElderRuleConfig::default()), Err(TmdError::FiltrationTreeMismatch)));
    }

    #[test]
    fn enrichment_path_mean() {
        // leaf(r=1) -> mid(r=2) -> death(r=3)
        let t = MorphTree::from_swc_str("1 1 0 0 0 3 -1\n2 3 1 0 0 2 1\n3 3 2 0 0 1 2").unwrap();
        let pair = PersistencePair { birth: 6.0, death: 2.0, leaf_id: 3, death_node_id: 1 };
        let d = enrich_pairs(&t, &[pair], "x").unwrap();
        assert_eq!(d.pairs[0].delta, 4.0);
        assert_eq!(d.pairs[0].mean_radius, 2.0);
        let tie = PersistencePair { birth: 5.0, death: 5.0, leaf_id: 3, death_node_id: 2 };
        assert_eq!(enrich_pairs(&t, &[tie], "x").unwrap().pairs[0].delta, 0.0);
    }

    #[test]
    fn enrichment_rejects_non_ancestor() {
        let t = MorphTree::from_swc_str("1 1 0 0 0 1 -1\n2 3 1 0 0 1 1\n3 3 0 1 0 1 1").unwrap();
        let bad = PersistencePair { birth: 1.0, death: 0.0, leaf_id: 3, death_node_id: 2 };
        assert!(matches!(enrich_pairs(&t, &[bad], "x"), Err(TmdError::NotAnAncestor { leaf: 3, death: 2 })));
    }

    #[test]
    fn constant_radius_paths() {
        let t = MorphTree::from_swc_str("1 1 0 0 0 0.7 -1\n2 3 2 0 0 0.7 1\n3 3 9 0 0 0.7 2\n4 3 0 4 0 0.7 2\n5 3 0 0 3 0.7 1").unwrap();
        let d = PersistenceDiagram::from_tree(&t, "c", ElderRuleConfig::default());
        assert_eq!(d.len(), 3);
        assert!(d.pairs.iter().all(|p| (p.mean_radius - 0.7).abs() < 1e-15));
    }

    #[test]
    fn deep_chain_does_not_recurse() {
        let mut text = String::from("1 1 0 0 0 1 -1\n");
        for i in 2..=200_000u64 {
            text.push_str(&format!("{} 3 {} 0 0 1 {}\n", i, i, i - 1));
        }
        let t = MorphTree::from_swc_str(&text).unwrap();
        let d = PersistenceDiagram::from_tree(&t, "chain", ElderRuleConfig::default());
        assert_eq!(d.pairs.len(), 1);
        assert_eq!(d.pairs[0].birth, 200_000.0);
    }

    #[test]
    fn csv_round_trip() {
        let d = PersistenceDiagram {
            neuron_id: "n1".into(),
            pairs: vec![
                EnrichedPair { birth: 10.5, death: 0.0, delta: 10.5, mean_radius: 1.0 / 3.0 },
                EnrichedPair { birth: 6.0, death: 2.0, delta: 4.0, mean_radius: 0.1 },
            ],
        };
        assert_eq!(PersistenceDiagram::from_csv(&d.to_csv(), "n1").unwrap(), d);
        assert!(PersistenceDiagram::from_csv("birth,death,delta,mean_radius\n1,2,3\n", "x").is_err());
    }
}
