//! Deterministic random stream derivation.
//!
//! Every stochastic phase of a run draws from a stream derived from the
//! master seed plus a fixed set of context values. Parallel evaluations
//! therefore consume independent streams and the merged result is
//! independent of scheduling order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

fn mix(mut h: u64, v: u64) -> u64 {
    // splitmix64 step
    h = h.wrapping_add(v).wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = h;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a stream from the master seed and an arbitrary context tuple.
pub fn derive(seed: u64, context: &[u64]) -> Stream {
    let mut h = mix(seed, 0x7067_5f73_7472_6d00); // domain tag
    for &v in context {
        h = mix(h, v);
    }
    ChaCha8Rng::seed_from_u64(h)
}

/// Stream for evaluating one (root, task, episode) triple within a generation.
pub fn eval_stream(seed: u64, generation: u64, root: u64, task: u64, episode: u64) -> Stream {
    derive(seed, &[1, generation, root, task, episode])
}

/// Stream driving offspring generation for one generation.
pub fn variation_stream(seed: u64, generation: u64) -> Stream {
    derive(seed, &[2, generation])
}

/// Stream for champion test episodes.
pub fn test_stream(seed: u64, generation: u64, task_set: u64, task: u64, episode: u64) -> Stream {
    derive(seed, &[3, generation, task_set, task, episode])
}

/// Stream for population initialization.
pub fn init_stream(seed: u64) -> Stream {
    derive(seed, &[0])
}
