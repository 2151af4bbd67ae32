//! SplitMix64: the counter-based generator behind every random draw in the
//! harness (Steele, Lea & Flood, "Fast splittable pseudorandom number
//! generators", OOPSLA 2014). It is trivial to reimplement in any language,
//! which keeps generated scenarios reproducible outside this crate:
//!
//! ```text
//! state += 0x9E3779B97F4A7C15
//! z = state
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! output = z ^ (z >> 31)
//! ```
//!
//! Streams are derived by folding identifiers into the seed with the same
//! mixing function, so (seed, mvno, user) always addresses the same draws
//! no matter which schemes run or in which order.

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

const GOLDEN: u64 = 0x9E3779B97F4A7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    /// Deterministic sub-stream for a tuple of identifiers.
    pub fn stream(seed: u64, ids: &[u64]) -> Self {
        let mut state = mix(seed.wrapping_add(GOLDEN));
        for &id in ids {
            state = mix(state ^ id.wrapping_mul(GOLDEN));
        }
        SplitMix64 { state }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix(self.state)
    }

    /// Uniform double in [0, 1) with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform integer in `lo..=hi`. Plain modulo reduction: the bias is
    /// negligible for the small ranges used here and the rule is easy to
    /// replicate elsewhere.
    pub fn uniform_u32(&mut self, lo: u32, hi: u32) -> u32 {
        debug_assert!(lo <= hi);
        let span = (hi - lo) as u64 + 1;
        lo + (self.next_u64() % span) as u32
    }

    /// Uniform double in [lo, hi).
    pub fn uniform_f64(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}
