//! Deterministic random numbers.
//!
//! Everything stochastic in this crate (surface sampling, attacks, data
//! augmentation, weight initialization, batch shuffling) draws from
//! [`SplitMix64`], the counter-based generator of Steele, Lea and Flood
//! ("Fast splittable pseudorandom number generators", OOPSLA 2014). The
//! i-th output is a pure function of `(seed, stream, i)`, so any sample can
//! be reproduced independently of iteration order, and per-file or per-item
//! streams can be split off without coordination.

/// Golden-ratio increment used by SplitMix64.
const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Finalization mix (Stafford's variant 13 of the MurmurHash3 finalizer).
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a 64-bit hash; used to derive stable stream ids from paths.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100_0000_01B3);
    }
    h
}

/// Counter-based 64-bit generator with splittable streams.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    /// Generator for the root stream of `seed`.
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    /// Generator for an independent stream. The stream id is mixed into the
    /// seed so that streams with nearby ids are uncorrelated.
    pub fn stream(seed: u64, stream: u64) -> Self {
        SplitMix64 {
            state: seed ^ mix64(stream.wrapping_mul(GAMMA) ^ 0x5851_F42D_4C95_7F2D),
        }
    }

    /// Next raw 64-bit output.
    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        mix64(self.state)
    }

    /// Uniform in `[0, 1)` with 53 significant bits.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    #[inline]
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `[0, n)`; `n` must be positive.
    #[inline]
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        // Multiply-shift rejection-free mapping; bias is < 2^-53 for the
        // cloud sizes used here.
        (self.uniform() * n as f64) as usize % n
    }

    /// Standard normal deviate via Box-Muller. Each call consumes exactly
    /// two uniforms, keeping the draw count position-independent.
    pub fn gaussian(&mut self) -> f64 {
        let u1 = loop {
            let u = self.uniform();
            if u > 0.0 {
                break u;
            }
        };
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}
