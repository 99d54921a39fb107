//! Seed derivation and checksum helpers.
//!
//! Every source of randomness in the simulator is a ChaCha stream derived
//! from one master seed plus a purpose tag, so that runs are reproducible
//! and independent components never share a stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

/// FNV-1a over a byte slice. Also used for aggregate checksums in reports.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Mix a master seed with a purpose tag and two indices into a stream seed.
pub fn derive_seed(master: u64, tag: &str, a: u64, b: u64) -> u64 {
    let mut h = fnv1a(tag.as_bytes());
    h ^= splitmix64(master);
    h = h.wrapping_mul(FNV_PRIME) ^ splitmix64(a.wrapping_add(0x1234_5678));
    h = h.wrapping_mul(FNV_PRIME) ^ splitmix64(b.wrapping_add(0x9abc_def0));
    splitmix64(h)
}

/// Deterministic ChaCha stream for (master seed, tag, indices).
pub fn stream(master: u64, tag: &str, a: u64, b: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, tag, a, b))
}

/// Checksum of an f64 slice over the raw bit patterns.
pub fn checksum_f64(values: &[f64]) -> u64 {
    let mut h = FNV_OFFSET;
    for v in values {
        for b in v.to_bits().to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(FNV_PRIME);
        }
    }
    h
}

/// Checksum of a sign slice.
pub fn checksum_i8(values: &[i8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &v in values {
        h ^= v as u8 as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}
