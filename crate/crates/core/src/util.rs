//! Small deterministic helpers used by several modules.

/// SplitMix64 step. Fixed constants from the reference implementation; used
/// instead of an RNG crate so that generated jitter and start vectors are
/// bit-identical across runs, platforms and dependency bumps.
pub(crate) fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform sample in [0, 1) with 53 random bits.
pub(crate) fn splitmix_unit(state: &mut u64) -> f64 {
    (splitmix64(state) >> 11) as f64 / (1u64 << 53) as f64
}

/// FNV-1a over a byte string, hex-encoded. Good enough to fingerprint inputs
/// in certificates and reports; not a cryptographic hash.
pub(crate) fn fnv1a_hex(bytes: &[u8]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    format!("{h:016x}")
}

/// Canonical text form of an f64 for digests: exact bit pattern.
pub(crate) fn f64_bits(x: f64) -> String {
    format!("{:016x}", x.to_bits())
}

/// sin(pi x) / (pi x), continuously extended at 0.
pub(crate) fn sinc(x: f64) -> f64 {
    let px = std::f64::consts::PI * x;
    if px.abs() < 1e-8 {
        1.0 - px * px / 6.0
    } else {
        px.sin() / px
    }
}
