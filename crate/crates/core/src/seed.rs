//! Stable seed derivation.
//!
//! Batch outputs must be reproducible from `(global_seed, item identity)`
//! across runs, worker counts, and toolchain updates, so seeds are derived
//! with fixed, documented mixing (FNV-1a + splitmix64) rather than
//! `DefaultHasher`, whose algorithm is unspecified.

/// splitmix64 finalizer; decorrelates structured inputs like small integers.
pub fn splitmix64(seed: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent stream seed from a base seed and a small salt.
pub fn derive(base: u64, salt: u64) -> u64 {
    splitmix64(base ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Per-item seed for batch work: a stable hash of the global seed, the
/// item's relative path, and its repetition index. Insertion order and
/// worker scheduling never enter the calculation.
pub fn item_seed(global_seed: u64, rel_path: &str, rep: u32) -> u64 {
    const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
    fn eat(mut h: u64, bytes: &[u8]) -> u64 {
        for &b in bytes {
            h = (h ^ b as u64).wrapping_mul(FNV_PRIME);
        }
        h
    }
    let mut h = FNV_OFFSET;
    h = eat(h, &global_seed.to_le_bytes());
    h = eat(h, rel_path.as_bytes());
    h = eat(h, &rep.to_le_bytes());
    splitmix64(h)
}
