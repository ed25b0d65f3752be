//! The pinned pseudo-random generator behind every seeded operation.
//!
//! splitmix64 is pinned (rather than deferring to a generic RNG crate) so
//! that shuffled serializations, and therefore embedding cache keys, are
//! reproducible across releases, platforms, and reimplementations in other
//! languages.

/// splitmix64: 64 bits of state, one multiply-xorshift chain per output.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    /// Creates a generator seeded with `seed`.
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Returns the next 64-bit output.
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Returns a value in `0..bound` by plain modulo reduction.
    ///
    /// The modulo bias is negligible for the bounds that occur here (line
    /// counts, training-set sizes) and keeping the reduction rejection-free
    /// makes the output sequence trivial to replicate elsewhere.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        self.next_u64() % bound
    }

    /// Returns a float uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        // 53 random mantissa bits.
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// In-place Fisher–Yates shuffle driven by [`SplitMix64`].
pub fn shuffle_in_place<T>(items: &mut [T], seed: u64) {
    let mut rng = SplitMix64::new(seed);
    for i in (1..items.len()).rev() {
        let j = rng.next_below(i as u64 + 1) as usize;
        items.swap(i, j);
    }
}
