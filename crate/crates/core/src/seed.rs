//! Reproducible random streams.
//!
//! Every random task (one split, one replication, one table cell) owns a
//! ChaCha8 stream identified by `(seed, index)`: the generator is seeded
//! with `seed` and switched to stream number `index`. Streams with distinct
//! indices never overlap, so results do not depend on scheduling order and
//! adding tasks never perturbs earlier ones.
//!
//! Nested tasks get child seeds from [`derive_seed`], a SplitMix64 mix of
//! the parent seed and the task index.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
