//! Named random streams.
//!
//! Every consumer of randomness draws from its own ChaCha8 stream, selected by
//! a label and a few integer coordinates. The 64-bit master seed fixes the key;
//! the label picks the stream id. Adding a new consumer never shifts the draws
//! seen by an existing one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(mut hash: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// Stream id for a label plus integer coordinates.
pub fn stream_id(label: &str, coords: &[u64]) -> u64 {
    let mut h = fnv1a(FNV_OFFSET, label.as_bytes());
    for c in coords {
        h = fnv1a(h, &[0xff]);
        h = fnv1a(h, &c.to_le_bytes());
    }
    h
}

/// Generator for `(seed, label, coords)`.
pub fn stream(seed: u64, label: &str, coords: &[u64]) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(label, coords));
    rng
}

/// Stream keyed by a string coordinate, e.g. a predicate name.
pub fn named_stream(seed: u64, label: &str, name: &str, coords: &[u64]) -> ChaCha8Rng {
    let mut h = fnv1a(FNV_OFFSET, label.as_bytes());
    h = fnv1a(h, &[0xfe]);
    h = fnv1a(h, name.as_bytes());
    for c in coords {
        h = fnv1a(h, &[0xff]);
        h = fnv1a(h, &c.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(h);
    rng
}
