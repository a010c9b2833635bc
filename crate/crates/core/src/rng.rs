//! Named, order-independent random substreams derived from one root seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

fn derive(root_seed: u64, parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(root_seed.to_le_bytes());
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    let digest = h.finalize();
    let mut out = [0u8; 32];
    out.copy_from_slice(&digest[..32]);
    out
}

/// Generator for a named component ("init", "synth", "rsa", ...).
pub fn substream(root_seed: u64, name: &str) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(derive(root_seed, &[name.as_bytes()]))
}

/// A 64-bit seed for a named component, for APIs that take plain seeds.
pub fn substream_seed(root_seed: u64, name: &str) -> u64 {
    let d = derive(root_seed, &[name.as_bytes()]);
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// Per-diagram, per-view generator: depends only on `(seed, neuron_id, view)`,
/// never on batch composition or processing order.
pub fn diagram_rng(seed: u64, neuron_id: &str, view: u64) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(derive(seed, &[b"augment", neuron_id.as_bytes(), &view.to_le_bytes()]))
}
