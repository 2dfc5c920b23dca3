//! Seeded random number generation with a deterministic stream-split rule.
//!
//! Every stochastic entry point takes a 64-bit seed. Parallel work items
//! (replicates, restarts, chains) derive independent child streams with
//! [`child_seed`], so results are byte-identical for a given master seed
//! regardless of scheduling.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used throughout; stable output across platforms.
pub type Rng64 = ChaCha8Rng;

/// Build a generator from a 64-bit seed.
pub fn rng_from_seed(seed: u64) -> Rng64 {
    Rng64::seed_from_u64(seed)
}

/// Child seed for stream `index` under `parent`.
///
/// Split rule: two rounds of the splitmix64 finalizer over the parent seed
/// xored with the (mixed) index. Collision-free in practice for the stream
/// counts used here and stable across versions of this crate.
pub fn child_seed(parent: u64, index: u64) -> u64 {
    splitmix64(parent ^ splitmix64(index.wrapping_add(0x9e3779b97f4a7c15)))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn deterministic_given_seed() {
        let mut a = rng_from_seed(42);
        let mut b = rng_from_seed(42);
        for _ in 0..100 {
            assert_eq!(a.gen::<u64>(), b.gen::<u64>());
        }
    }

    #[test]
    fn child_streams_differ() {
        let s0 = child_seed(7, 0);
        let s1 = child_seed(7, 1);
        assert_ne!(s0, s1);
        assert_ne!(s0, 7);
    }
}
