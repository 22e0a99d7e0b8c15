use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random stream used throughout the crate.
pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Independent stream for a master seed and a key path such as `[rep, player]`.
///
/// Streams depend only on `(seed, key)`, so work can be split across threads
/// without changing results.
pub fn derive_stream(seed: u64, key: &[u64]) -> StreamRng {
    let mut h = splitmix64(seed);
    for &k in key {
        h = splitmix64(h ^ splitmix64(k.wrapping_add(0xA076_1D64_78BD_642F)));
    }
    StreamRng::seed_from_u64(h)
}

/// Draws a seed for a sub-computation from a caller-provided stream.
pub fn child_seed<R: rand::Rng + ?Sized>(rng: &mut R) -> u64 {
    rng.random()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = derive_stream(7, &[1, 2]).random();
        let b: u64 = derive_stream(7, &[1, 2]).random();
        let c: u64 = derive_stream(7, &[2, 1]).random();
        let d: u64 = derive_stream(8, &[1, 2]).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }
}
