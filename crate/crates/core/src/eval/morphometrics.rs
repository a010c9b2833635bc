use crate::features::path_lengths;
use crate::filtration::compute_filtration;
use crate::swc::MorphTree;
use crate::tmd::{ElderRuleConfig, PersistenceDiagram};

pub const MORPHOMETRIC_NAMES: [&str; 8] = [
    "leaf_count",
    "bifurcation_count",
    "total_cable_length",
    "max_radial_extent",
    "max_branch_order",
    "mean_radius",
    "mean_leaf_path_length",
    "total_persistence",
];

/// Eight classical shape descriptors, in the order of [`MORPHOMETRIC_NAMES`].
/// A bifurcation is any node with at least two children, the root included;
/// a node's branch order is the number of bifurcations strictly above it.
pub fn morphometrics(tree: &MorphTree) -> [f64; 8] {
    let n = tree.len();
    let mut order = vec![0usize; n];
    for v in 1..n {
        let p = tree.parent(v).expect("non-root");
        order[v] = order[p] + usize::from(tree.children(p).len() >= 2);
    }
    let bifurcations = (0..n).filter(|&v| tree.children(v).len() >= 2).count();
    let cable: f64 = (1..n).map(|v| tree.edge_length(v)).sum();
    let paths = path_lengths(tree);
    let leaves: Vec<usize> = tree.leaves().collect();
    let mean_leaf_path = leaves.iter().map(|&l| paths[l]).sum::<f64>() / leaves.len() as f64;
    let mean_radius = tree.records().iter().map(|r| r.radius).sum::<f64>() / n as f64;
    let diagram = PersistenceDiagram::from_tree(tree, "", ElderRuleConfig::default());
    [
        leaves.len() as f64,
        bifurcations as f64,
        cable,
        compute_filtration(tree).max(),
        order.iter().copied().max().unwrap_or(0) as f64,
        mean_radius,
        mean_leaf_path,
        diagram.pairs.iter().map(|p| p.delta).sum(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_edge() {
        let t = MorphTree::from_swc_str("1 1 0 0 0 1 -1\n2 3 10 0 0 1 1\n").unwrap();
        let m = morphometrics(&t);
        assert_eq!(&m[..6], &[1.0, 0.0, 10.0, 10.0, 0.0, 1.0]);
        assert_eq!(m[6], 10.0);
        assert_eq!(m[7], 10.0);
    }

    #[test]
    fn star_counts_root_bifurcation() {
        let t = MorphTree::from_swc_str("1 1 0 0 0 1 -1\n2 3 1 0 0 1 1\n3 3 0 1 0 1 1\n4 3 0 0 1 1 1\n").unwrap();
        let m = morphometrics(&t);
        assert_eq!(m[0], 3.0);
        assert_eq!(m[1], 1.0);
        assert_eq!(m[2], 3.0);
        assert_eq!(m[4], 1.0);
        assert_eq!(m[7], 3.0);
    }

    #[test]
    fn child_order_invariant() {
        let a = MorphTree::from_swc_str("1 1 0 0 0 1 -1\n2 3 1 0 0 1 1\n3 3 0 2 0 1 1\n4 3 0 2 3 2 3\n").unwrap();
        let b = MorphTree::from_swc_str("1 1 0 0 0 1 -1\n3 3 0 2 0 1 1\n4 3 0 2 3 2 3\n2 3 1 0 0 1 1\n").unwrap();
        assert_eq!(morphometrics(&a), morphometrics(&b));
    }
}
