#![allow(dead_code)]

use neurotopo_core::filtration::compute_filtration;
use neurotopo_core::MorphTree;

/// Superlevel-set persistence of the radial filtration by union-find over the
/// tree's edges, independent of the elder-rule sweep.
///
/// Nodes enter in decreasing `f`, deeper nodes first on ties, so a node's
/// children are always present before it. A node with no present neighbour
/// opens a component; when components meet, all but the one with the highest
/// birth die at the current value. The survivor dies at `f(root)`.
pub fn union_find_pairs(tree: &MorphTree) -> Vec<(f64, f64)> {
    let f = compute_filtration(tree);
    let n = tree.len();
    let mut depth = vec![0usize; n];
    for v in 1..n {
        depth[v] = depth[tree.parent(v).unwrap()] + 1;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| f.get(b).total_cmp(&f.get(a)).then(depth[b].cmp(&depth[a])));

    let mut parent: Vec<usize> = (0..n).collect();
    let mut birth = vec![f64::NAN; n];
    let mut present = vec![false; n];
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut pairs = Vec::new();
    for &v in &order {
        present[v] = true;
        let mut neighbours: Vec<usize> = tree.children(v).to_vec();
        neighbours.extend(tree.parent(v));
        let mut roots: Vec<usize> = neighbours.into_iter().filter(|&u| present[u]).map(|u| find(&mut parent, u)).collect();
        roots.sort_unstable();
        roots.dedup();
        if roots.is_empty() {
            birth[v] = f.get(v);
            continue;
        }
        roots.sort_by(|&a, &b| birth[b].total_cmp(&birth[a]));
        let keep = roots[0];
        for &r in &roots[1..] {
            pairs.push((birth[r], f.get(v)));
            parent[r] = keep;
        }
        parent[v] = keep;
    }
    let last = find(&mut parent, tree.root());
    pairs.push((birth[last], f.get(tree.root())));
    pairs
}

pub fn sorted(mut v: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    v
}

/// Rotation about an arbitrary axis by `angle`, followed by a translation.
pub fn rigid_motion(axis: [f64; 3], angle: f64, shift: [f64; 3]) -> impl Fn([f64; 3]) -> [f64; 3] {
    let norm = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let [x, y, z] = axis.map(|a| a / norm);
    let (s, c) = angle.sin_cos();
    let t = 1.0 - c;
    let r = [
        [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
        [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
        [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
    ];
    move |p: [f64; 3]| std::array::from_fn(|i| r[i][0] * p[0] + r[i][1] * p[1] + r[i][2] * p[2] + shift[i])
}
