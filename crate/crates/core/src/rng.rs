//! SplitMix64, the single PRNG used across the pipeline.
//!
//! Every random draw (augmentation, shuffling, dropout masks, weight init) is
//! derived from a `(seed, stream)` pair so results are reproducible and
//! portable to other languages bit-for-bit.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// The SplitMix64 output finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Independent stream for `(seed, stream_id)`: the state starts at
    /// `seed ^ mix64(stream_id + GOLDEN_GAMMA)`.
    pub fn for_stream(seed: u64, stream_id: u64) -> Self {
        Self::new(seed ^ mix64(stream_id.wrapping_add(GOLDEN_GAMMA)))
    }

    /// Stream keyed by an arbitrary list of integers, folded left through
    /// [`mix64`].
    pub fn keyed(seed: u64, keys: &[u64]) -> Self {
        let stream = keys
            .iter()
            .fold(0u64, |acc, &k| mix64(acc ^ k.wrapping_add(GOLDEN_GAMMA)));
        Self::for_stream(seed, stream)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `(0, 1]`.
    fn next_f64_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, bound)` via the 128-bit multiply-shift map.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "bound must be positive");
        ((self.next_u64() as u128 * bound as u128) >> 64) as u64
    }

    /// Standard normal via Box-Muller; consumes exactly two draws.
    pub fn next_gaussian(&mut self) -> f64 {
        let u1 = self.next_f64_open();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// Fisher-Yates shuffle from the last index down.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}
