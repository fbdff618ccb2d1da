//! Small deterministic RNG for bootstrap resampling and simulation.
//!
//! Replicate `b` of a run draws from a stream keyed by `(seed, b)`, so results
//! are reproducible for a given seed regardless of thread scheduling.

const GOLDEN_GAMMA: u64 = 0x9e3779b97f4a7c15;

/// splitmix64 finalizer. Statistically solid for resampling work and cheap
/// enough to reseed per replicate.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Counter-based splitmix64 stream.
#[derive(Debug, Clone)]
pub struct CounterRng {
    state: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Stream `stream` of the run keyed by `seed`. Distinct `(seed, stream)`
    /// pairs give independent-looking streams.
    pub fn from_key(seed: u64, stream: u64) -> Self {
        let state = mix(seed ^ mix(stream.wrapping_mul(GOLDEN_GAMMA)));
        Self { state }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix(self.state)
    }

    /// Uniform index in `0..n` via Lemire's multiply-shift map. Bias is
    /// below 2^-64 for any n that fits a resampling workload.
    pub fn next_index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        let x = self.next_u64();
        ((x as u128 * n as u128) >> 64) as usize
    }

    /// Uniform f64 in [0, 1) with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}
