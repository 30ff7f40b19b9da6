//! Counter-based seed derivation.
//!
//! Every stochastic routine derives its generator from `(master, label, index)`
//! so that runs are reproducible and can be sharded across threads without
//! sharing generator state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn combine(a: u64, b: u64) -> u64 {
    mix64(a ^ mix64(b))
}

/// Seed for draw `index` of a sampled mechanism on `dataset`.
pub fn stream_seed(master: u64, dataset: &[usize], index: u64) -> u64 {
    let mut h = mix64(master);
    for &x in dataset {
        h = combine(h, x as u64);
    }
    combine(h, index)
}

pub fn rng(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

pub fn sub_rng(seed: u64, stream: u64) -> Rng {
    Rng::seed_from_u64(combine(seed, stream))
}
