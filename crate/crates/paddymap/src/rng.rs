//! Deterministic stream derivation for every stochastic draw in the pipeline.
//!
//! All randomness is counter-based: a draw site derives its own ChaCha8
//! stream from (base seed, purpose tag, indices). No RNG state is threaded
//! through the code, so resuming from a checkpoint or re-running a stage
//! reproduces the exact same draws regardless of thread count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; good avalanche for seed mixing.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derive a sub-seed from a base seed, a static purpose tag and indices.
pub fn derive(seed: u64, tag: &str, indices: &[u64]) -> u64 {
    let mut h = mix(seed ^ 0x243f6a8885a308d3);
    for &b in tag.as_bytes() {
        h = mix(h ^ b as u64);
    }
    for &i in indices {
        h = mix(h ^ i);
    }
    h
}

/// Seeded stream for one draw site.
pub fn stream(seed: u64, tag: &str, indices: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, tag, indices))
}
