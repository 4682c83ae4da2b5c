//! Deterministic, splittable pseudo-randomness.
//!
//! Every random draw in the crate comes from a [`SplitMix64`] generator whose
//! state is derived by hashing `(seed, stream id, step)`. Draws at a given
//! coordinate therefore never depend on how many draws other streams or other
//! steps have consumed, which keeps traces reproducible and lets grid points
//! and links be sampled independently and in parallel.

use rand::RngCore;

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Finalizing mix of splitmix64. Bijective on `u64`.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fold a sequence of words into a single 64-bit value.
///
/// Defined as `state := mix64(state ^ (word + GAMMA))` starting from the
/// first argument. Used wherever a seed is derived from coordinates (link
/// index, step, grid point) so that the derivation is stated once.
pub fn mix_words(init: u64, words: &[u64]) -> u64 {
    let mut state = mix64(init.wrapping_add(GAMMA));
    for &w in words {
        state = mix64(state ^ w.wrapping_add(GAMMA));
    }
    state
}

/// The splitmix64 generator.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(state: u64) -> Self {
        Self { state }
    }

    #[inline]
    pub fn next(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        mix64(self.state)
    }

    /// Uniform draw from `[0, 1)` using the high 53 bits.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

impl RngCore for SplitMix64 {
    fn next_u32(&mut self) -> u32 {
        (self.next() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.next()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        for chunk in dest.chunks_mut(8) {
            let bytes = self.next().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.fill_bytes(dest);
        Ok(())
    }
}

/// Role a stream plays in a simulation; kept distinct so streams for
/// different purposes never collide even when their indices do.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamDomain {
    Link,
    Arrival,
    Swap,
    Scheduler,
}

impl StreamDomain {
    fn tag(self) -> u64 {
        match self {
            StreamDomain::Link => 1,
            StreamDomain::Arrival => 2,
            StreamDomain::Swap => 3,
            StreamDomain::Scheduler => 4,
        }
    }
}

/// A deterministic stream of per-step generators.
///
/// Identical `(seed, domain, index, step)` always yields identical draws,
/// regardless of what was sampled before.
#[derive(Debug, Clone, Copy)]
pub struct RngStream {
    seed: u64,
    stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, domain: StreamDomain, index: u64) -> Self {
        Self {
            seed,
            stream: mix_words(seed, &[domain.tag(), index]),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Generator for one time step of this stream.
    #[inline]
    pub fn at_step(&self, step: u64) -> SplitMix64 {
        SplitMix64::new(mix_words(self.stream, &[step]))
    }
}
