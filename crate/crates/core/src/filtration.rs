//! Monotone radial-distance filtration over a morphology tree.

use std::collections::VecDeque;
use std::fmt::Write as _;

use thiserror::Error;

use crate::swc::{euclidean, MorphTree, NodeId};

#[derive(Debug, Error)]
pub enum FiltrationError {
    #[error("unknown node id {0}")]
    UnknownNode(NodeId),
}

/// Filtration values indexed like the nodes of the tree they were computed on.
#[derive(Debug, Clone, PartialEq)]
pub struct FiltrationMap {
    values: Vec<f64>,
    root_id: NodeId,
}

impl FiltrationMap {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Whether this map plausibly belongs to `tree` (same size and root).
    pub fn matches(&self, tree: &MorphTree) -> bool {
        self.values.len() == tree.len() && tree.record(tree.root()).id == self.root_id
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// `node_id,f_value` rows with a header line.
    pub fn to_csv(&self, tree: &MorphTree) -> String {
        let mut out = String::from("node_id,f_value\n");
        for (i, v) in self.values.iter().enumerate() {
            let _ = writeln!(out, "{},{}", tree.record(i).id, v);
        }
        out
    }
}

/// Euclidean distance from a node (by SWC id) to the soma.
pub fn raw_radial_distance(tree: &MorphTree, node: NodeId) -> Result<f64, FiltrationError> {
    let idx = tree.index_of(node).ok_or(FiltrationError::UnknownNode(node))?;
    Ok(raw_distance_at(tree, idx))
}

fn raw_distance_at(tree: &MorphTree, idx: usize) -> f64 {
    euclidean(tree.record(idx).position, tree.record(tree.root()).position)
}

/// `f(root) = 0`, `f(v) = max(f(parent(v)), d_raw(v))`, evaluated breadth-first.
pub fn compute_filtration(tree: &MorphTree) -> FiltrationMap {
    let mut values = vec![0.0f64; tree.len()];
    let mut queue = VecDeque::from([tree.root()]);
    while let Some(p) = queue.pop_front() {
        for &c in tree.children(p) {
            values[c] = values[p].max(raw_distance_at(tree, c));
            queue.push_back(c);
        }
    }
    FiltrationMap { values, root_id: tree.record(tree.root()).id }
}
