//! Seeded random number generation.
//!
//! Every stochastic routine takes either a caller-owned generator or an
//! explicit seed. Monte Carlo work is split into a fixed number of shards,
//! each driven by its own ChaCha stream, so results do not depend on how
//! many worker threads execute them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the crate.
pub type SimRng = ChaCha8Rng;

/// Number of independent shards a Monte Carlo run is split into.
pub const SHARDS: u64 = 64;

pub fn seeded(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Generator for shard `shard` of a run seeded with `seed`.
pub fn shard_rng(seed: u64, shard: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(shard);
    rng
}

/// Mixes `tag` into `seed` (splitmix64 finalizer) for independent sub-runs.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Sample count handled by `shard` when `total` samples are split over [`SHARDS`].
pub fn shard_samples(total: u64, shard: u64) -> u64 {
    total / SHARDS + u64::from(shard < total % SHARDS)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn shards_cover_all_samples() {
        for total in [0, 1, 63, 64, 65, 1_000_003] {
            let sum: u64 = (0..SHARDS).map(|s| shard_samples(total, s)).sum();
            assert_eq!(sum, total);
        }
    }

    #[test]
    fn shard_streams_differ_and_repeat() {
        let a = shard_rng(9, 0).next_u64();
        let b = shard_rng(9, 1).next_u64();
        assert_ne!(a, b);
        assert_eq!(a, shard_rng(9, 0).next_u64());
    }
}
