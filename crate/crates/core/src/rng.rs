//! Seeded randomness.
//!
//! Every random draw in the crate comes from [`SplitMix64`]. Independent
//! streams are derived from one user seed with [`stream_seed`], which hashes
//! a stream label (FNV-1a) and mixes it with the seed through the SplitMix64
//! finalizer. Changing the label changes the stream; the same `(seed, label)`
//! pair always yields the same sequence.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01B3);
    }
    h
}

/// Derive the seed of a named sub-stream.
pub fn stream_seed(seed: u64, label: &str) -> u64 {
    mix64(seed ^ mix64(fnv1a(label).wrapping_add(GOLDEN_GAMMA)))
}

/// Derive the seed of the `index`-th member of a named family of streams
/// (one per trial, per latent, ...).
pub fn indexed_stream_seed(seed: u64, label: &str, index: u64) -> u64 {
    mix64(stream_seed(seed, label) ^ mix64(index.wrapping_add(GOLDEN_GAMMA)))
}

/// Steele, Lea and Flood's SplitMix64 with a cached Box–Muller spare.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
    spare_normal: Option<f64>,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self {
            state: seed,
            spare_normal: None,
        }
    }

    pub fn from_stream(seed: u64, label: &str) -> Self {
        Self::new(stream_seed(seed, label))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in the open interval `(0, 1)`.
    #[inline]
    pub fn next_open01(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n` (multiply-shift; bias is below 2^-64 * n).
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        ((u128::from(self.next_u64()) * n as u128) >> 64) as usize
    }

    /// Standard normal draw via the Box–Muller transform.
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = self.next_open01();
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }
}
