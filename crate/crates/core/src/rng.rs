//! Deterministic splitmix64 streams.
//!
//! Every random draw in the simulator (scene layout, detector outcomes, false
//! positives) comes from a [`SplitMix64`] keyed on a small tuple of integers, so
//! results depend only on the arguments and never on thread scheduling.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// The splitmix64 output finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Stream keyed on `seed` followed by every element of `keys`.
    ///
    /// Each key is folded in as `state = mix64(state ^ key) + gamma`, so
    /// `keyed(s, &[a, b])` and `keyed(s, &[b, a])` are unrelated streams.
    pub fn keyed(seed: u64, keys: &[u64]) -> Self {
        let mut state = mix64(seed.wrapping_add(GOLDEN_GAMMA));
        for &k in keys {
            state = mix64(state ^ k).wrapping_add(GOLDEN_GAMMA);
        }
        Self { state }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[lo, hi]` (inclusive). Uses a 128-bit multiply-shift,
    /// which is exact enough for the small ranges used here.
    pub fn range_inclusive(&mut self, lo: u64, hi: u64) -> u64 {
        debug_assert!(lo <= hi);
        let span = hi - lo + 1;
        if span == 0 {
            // full u64 range
            return self.next_u64();
        }
        lo + ((self.next_u64() as u128 * span as u128) >> 64) as u64
    }

    /// Unit normal deviate by Box-Muller, cosine branch only.
    ///
    /// Consumes exactly two uniforms: `u1` is mapped to `(0, 1]` so the log is
    /// finite, `u2` sets the angle.
    pub fn next_normal(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Poisson count with mean `lambda` (Knuth's product-of-uniforms method).
    pub fn next_poisson(&mut self, lambda: f64) -> u32 {
        if lambda <= 0.0 {
            return 0;
        }
        let limit = (-lambda).exp();
        let mut k = 0u32;
        let mut p = self.next_f64();
        while p > limit {
            k += 1;
            p *= self.next_f64();
        }
        k
    }
}
