//! Seeded random streams.
//!
//! Every stochastic decision draws from a ChaCha stream derived from the run
//! seed and a label, so streams for different layers or training steps never
//! interact and runs are reproducible.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Default seed used when none is given.
pub const DEFAULT_SEED: u64 = 94;

fn fnv1a(bytes: &[u8], mut h: u64) -> u64 {
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn mix(mut z: u64) -> u64 {
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a sub-seed from `seed`, a label and a list of counters.
pub fn derive_seed(seed: u64, label: &str, counters: &[u64]) -> u64 {
    let mut h = fnv1a(label.as_bytes(), 0xcbf2_9ce4_8422_2325 ^ mix(seed));
    for &c in counters {
        h = mix(h ^ mix(c.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    }
    mix(h)
}

/// Generator for a named stream.
pub fn stream(seed: u64, label: &str, counters: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(seed, label, counters))
}
