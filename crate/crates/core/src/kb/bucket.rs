//! Polynomial bucket hash.
//!
//! The hash deliberately congregates related records instead of spreading
//! them: a record's file position is `base_offset + fold(name) % bucket_length`,
//! so everything in one bucket lands in one contiguous disk region.

/// Polynomial fold `k <- k * seed + byte` over the UTF-8 bytes of `name`,
/// reduced modulo `modulus`.
///
/// The reduction is applied at every step, which is congruent to reducing the
/// arbitrary-precision fold once at the end, so long names cannot overflow.
pub fn fold_mod(name: &str, seed: u64, modulus: u64) -> u64 {
    assert!(modulus > 0, "modulus must be positive");
    let mut k: u64 = 0;
    for &byte in name.as_bytes() {
        k = ((u128::from(k) * u128::from(seed) + u128::from(byte)) % u128::from(modulus)) as u64;
    }
    k
}

/// In-file offset for `name`: `base_offset + fold_mod(name) % bucket_length`.
///
/// Deterministic; the result always lies in
/// `[base_offset, base_offset + bucket_length)`.
pub fn bucket_hash(name: &str, base_offset: u64, seed: u64, bucket_length: u64) -> u64 {
    base_offset + fold_mod(name, seed, bucket_length)
}
