//! Seed derivation for reproducible, order-independent random streams.
//!
//! Every unit of work (a graph sample, an error draw) gets its own
//! `ChaCha8Rng` whose seed is a stable mix of the master seed and the unit's
//! coordinates, so results never depend on which thread ran which unit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a sequence of coordinates into a single 64-bit seed.
pub fn derive_seed(master: u64, coords: &[u64]) -> u64 {
    coords.iter().fold(mix64(master.wrapping_add(GOLDEN)), |acc, &c| {
        mix64(acc ^ mix64(c.wrapping_add(GOLDEN)).wrapping_add(acc.rotate_left(17)))
    })
}

/// Deterministic generator for a given seed.
pub fn stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Domain tags keep graph and error streams disjoint even at equal indices.
pub(crate) const TAG_GRAPH: u64 = 0x0067_7261_7068;
pub(crate) const TAG_DRAW: u64 = 0x6472_6177;
