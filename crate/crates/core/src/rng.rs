//! Counter-based randomness.
//!
//! Every random quantity in the crate is derived from a 64-bit seed and a key
//! (vertex labels, label paths, ...) through a stateless mixing function, so a
//! draw never depends on the order in which other draws were made. Sequential
//! streams, where needed, are ChaCha generators keyed the same way.

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

/// Hash of a seed and a sequence of words.
#[inline]
pub fn hash_words(seed: u64, words: &[u64]) -> u64 {
    let mut h = mix64(seed ^ GOLDEN);
    for (i, &w) in words.iter().enumerate() {
        h = mix64(h ^ w.wrapping_add(GOLDEN.wrapping_mul(i as u64 + 1)));
    }
    h
}

/// Maps a 64-bit word to `[0, 1)` using its top 53 bits.
#[inline]
pub fn unit_f64(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform draw in `[0,1)` attached to the unordered pair `{x, y}`.
#[inline]
pub fn pair_uniform(seed: u64, x: usize, y: usize) -> f64 {
    let (a, b) = if x < y { (x, y) } else { (y, x) };
    unit_f64(hash_words(seed, &[0x5041_4952, a as u64, b as u64]))
}

/// A ChaCha stream keyed by `(seed, tag, key)`.
pub fn keyed_stream(seed: u64, tag: u64, key: &[u64]) -> ChaCha8Rng {
    let mut words = Vec::with_capacity(key.len() + 1);
    words.push(tag);
    words.extend_from_slice(key);
    ChaCha8Rng::seed_from_u64(hash_words(seed, &words))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_uniform_is_symmetric_and_in_range() {
        for x in 0..20 {
            for y in 0..20 {
                let u = pair_uniform(7, x, y);
                assert!((0.0..1.0).contains(&u));
                assert_eq!(u, pair_uniform(7, y, x));
            }
        }
    }

    #[test]
    fn different_seeds_differ() {
        assert_ne!(pair_uniform(1, 2, 3), pair_uniform(2, 2, 3));
        assert_ne!(hash_words(1, &[1, 2]), hash_words(1, &[2, 1]));
    }

    #[test]
    fn uniform_mean_is_half() {
        let m: f64 = (0..100_000).map(|i| unit_f64(hash_words(3, &[i]))).sum::<f64>() / 1e5;
        assert!((m - 0.5).abs() < 5.0 * (1.0f64 / 12.0 / 1e5).sqrt());
    }
}
