//! Counter-based SplitMix64.
//!
//! Draw number `n` (starting at 0) under key `seed` is
//!
//! ```text
//! x = seed + (n + 1) * 0x9E3779B97F4A7C15          (wrapping, u64)
//! x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9
//! x = (x ^ (x >> 27)) * 0x94D049BB133111EB
//! x =  x ^ (x >> 31)
//! ```
//!
//! and the uniform variate is `(x >> 11) * 2⁻⁵³ ∈ [0, 1)`. Draws for `n`
//! and `seed` are independent of any other draw, so a stream can be replayed
//! from any offset.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn mix(seed: u64, counter: u64) -> u64 {
    let mut x = seed.wrapping_add(counter.wrapping_add(1).wrapping_mul(GOLDEN));
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub fn uniform(seed: u64, counter: u64) -> f64 {
    (mix(seed, counter) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Sequential view over the counter stream.
#[derive(Clone, Debug)]
pub struct CounterRng {
    seed: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        Self { seed, counter: 0 }
    }

    pub fn next_u64(&mut self) -> u64 {
        let v = mix(self.seed, self.counter);
        self.counter += 1;
        v
    }

    pub fn next_f64(&mut self) -> f64 {
        let v = uniform(self.seed, self.counter);
        self.counter += 1;
        v
    }

    /// Uniform on `[-1, 1)`.
    pub fn next_signed(&mut self) -> f64 {
        2.0 * self.next_f64() - 1.0
    }
}
