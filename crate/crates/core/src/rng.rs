//! Counter-based seeding: every random stream is a pure function of the run
//! seed and an index tuple, so results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a seed with an ordered tuple of counters into a 64-bit key.
pub fn stream_key(seed: u64, counters: &[u64]) -> u64 {
    let mut h = splitmix64(seed ^ 0x6A09_E667_F3BC_C909);
    for (i, &c) in counters.iter().enumerate() {
        h = splitmix64(h ^ splitmix64(c.wrapping_add((i as u64 + 1) << 56)));
    }
    h
}

/// Uniform sample in [0, 1) addressed by (seed, counters).
pub fn counter_uniform(seed: u64, counters: &[u64]) -> f64 {
    (stream_key(seed, counters) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Independent ChaCha stream addressed by (seed, counters).
pub fn stream(seed: u64, counters: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_key(seed, counters))
}
