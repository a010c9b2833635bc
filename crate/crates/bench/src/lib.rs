//! Seeded fixtures shared by the benchmarks.

use neurotopo_core::contrastive::Sample;
use neurotopo_core::eval::synth::{full_binary_tree, random_tree};
use neurotopo_core::rng::substream;
use neurotopo_core::{ElderRuleConfig, Embedding, MorphTree, PersistenceDiagram};
use rand::Rng;

pub fn tree(n: usize, seed: u64) -> MorphTree {
    random_tree(&mut substream(seed, "bench-tree"), n)
}

pub fn binary_tree(depth: u32, seed: u64) -> MorphTree {
    full_binary_tree(&mut substream(seed, "bench-binary"), depth, 1.0)
}

pub fn diagram(n: usize, seed: u64) -> PersistenceDiagram {
    PersistenceDiagram::from_tree(&tree(n, seed), format!("bench{seed}"), ElderRuleConfig::default())
}

pub fn samples(count: usize, nodes: usize, seed: u64) -> Vec<Sample> {
    (0..count).map(|i| Sample::new(format!("s{i}"), tree(nodes, seed + i as u64))).collect()
}

pub fn unit_vectors(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = substream(seed, "bench-vec");
    (0..n).map(|_| Embedding::l2_normalized((0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).values).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_seeded() {
        assert_eq!(tree(50, 1), tree(50, 1));
        assert_eq!(binary_tree(3, 0).leaf_count(), 8);
        assert_eq!(diagram(40, 2).len(), tree(40, 2).leaf_count());
        assert_eq!(unit_vectors(3, 4, 0), unit_vectors(3, 4, 0));
    }
}
