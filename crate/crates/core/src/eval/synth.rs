//! Seeded synthetic morphologies.

use rand::Rng;
use rand_distr::{Distribution, UnitSphere};

use crate::rng::substream;
use crate::swc::{build_tree, MorphTree, SwcRecord};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticNeuron {
    pub id: String,
    pub label: usize,
    pub tree: MorphTree,
}

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("classes must be in 2..=5, got {0}")]
    InvalidClassCount(usize),
}

fn direction<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    UnitSphere.sample(rng)
}

/// Full binary tree of the given depth (`2^depth` leaves). Edge lengths are
/// `U(5,10) * length_scale`, radii `U(0.5,1.5)`, directions uniform on the sphere.
pub fn full_binary_tree<R: Rng + ?Sized>(rng: &mut R, depth: u32, length_scale: f64) -> MorphTree {
    let mut records = vec![SwcRecord::new(1, 1, [0.0; 3], rng.random_range(0.5..1.5), None)];
    let mut frontier = vec![0usize];
    for _ in 0..depth {
        let mut next = Vec::with_capacity(frontier.len() * 2);
        for &p in &frontier {
            for _ in 0..2 {
                let len = rng.random_range(5.0..10.0) * length_scale;
                let dir = direction(rng);
                let base = records[p].position;
                let pos = [base[0] + len * dir[0], base[1] + len * dir[1], base[2] + len * dir[2]];
                let id = records.len() as u64 + 1;
                records.push(SwcRecord::new(id, 3, pos, rng.random_range(0.5..1.5), Some(records[p].id)));
                next.push(records.len() - 1);
            }
        }
        frontier = next;
    }
    build_tree(&records).expect("generated tree is valid")
}

/// `n_per_class` trees for each class `c`, of depth `3 + c` and edge scale
/// `1 + 0.1 c`. Ids are `c{class}_{index:04}`; order is class-major.
pub fn generate_synthetic_dataset(n_per_class: usize, classes: usize, seed: u64) -> Result<Vec<SyntheticNeuron>, SynthError> {
    if !(2..=5).contains(&classes) {
        return Err(SynthError::InvalidClassCount(classes));
    }
    let mut rng = substream(seed, "synth");
    let mut out = Vec::with_capacity(n_per_class * classes);
    for c in 0..classes {
        for i in 0..n_per_class {
            let tree = full_binary_tree(&mut rng, 3 + c as u32, 1.0 + 0.1 * c as f64);
            out.push(SyntheticNeuron { id: format!("c{c}_{i:04}"), label: c, tree });
        }
    }
    Ok(out)
}

/// Random recursive tree on `n >= 1` nodes: node `i` attaches to a uniform
/// earlier node. Ids are shuffled so file order differs from BFS order.
pub fn random_tree<R: Rng + ?Sized>(rng: &mut R, n: usize) -> MorphTree {
    assert!(n >= 1);
    let mut ids: Vec<u64> = (1..=n as u64).collect();
    for i in (1..n).rev() {
        ids.swap(i, rng.random_range(0..=i));
    }
    let mut positions: Vec<[f64; 3]> = vec![[0.0; 3]];
    let mut records = vec![SwcRecord::new(ids[0], 1, [0.0; 3], rng.random_range(0.2..2.0), None)];
    for i in 1..n {
        let p = rng.random_range(0..i);
        let dir = direction(rng);
        let len = rng.random_range(0.5..10.0);
        let b = positions[p];
        let pos = [b[0] + len * dir[0], b[1] + len * dir[1], b[2] + len * dir[2]];
        positions.push(pos);
        records.push(SwcRecord::new(ids[i], 3, pos, rng.random_range(0.2..2.0), Some(ids[p])));
    }
    // Shuffle record order as well.
    for i in (1..n).rev() {
        records.swap(i, rng.random_range(0..=i));
    }
    build_tree(&records).expect("generated tree is valid")
}
