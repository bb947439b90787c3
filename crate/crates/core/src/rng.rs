//! SplitMix64: the single PRNG used everywhere a seed appears.
//!
//! State advances by the golden-ratio increment `0x9E3779B97F4A7C15` and
//! each output is the Stafford "mix13" finalizer of the new state. The
//! stream for a given seed is therefore fixed and easy to re-derive in any
//! language.

use crate::math;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform integer in `0..bound` by rejection: draws below
    /// `2^64 mod bound` are discarded so every residue is equally likely.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "bound must be positive");
        let threshold = bound.wrapping_neg() % bound;
        loop {
            let r = self.next_u64();
            if r >= threshold {
                return r % bound;
            }
        }
    }

    /// Uniform in `[0, 1)` from the top 53 bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `(0, 1]`, safe to take the log of.
    pub fn uniform_open0(&mut self) -> f64 {
        1.0 - self.uniform()
    }

    /// Standard normal by Box–Muller; one draw per call, the sine branch is
    /// discarded so the stream position is a pure function of the call count.
    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform_open0();
        let u2 = self.uniform();
        math::sqrt(-2.0 * math::ln(u1)) * math::cos(core::f64::consts::TAU * u2)
    }

    /// Unit-rate exponential.
    pub fn exponential(&mut self) -> f64 {
        -math::ln(self.uniform_open0())
    }

    /// Gamma(shape, 1) by Marsaglia–Tsang; shapes below one use the
    /// `U^(1/shape)` boost.
    pub fn gamma(&mut self, shape: f64) -> f64 {
        assert!(shape > 0.0, "shape must be positive");
        if shape < 1.0 {
            let u = self.uniform_open0();
            return self.gamma(shape + 1.0) * math::exp(math::ln(u) / shape);
        }
        let d = shape - 1.0 / 3.0;
        let c = 1.0 / math::sqrt(9.0 * d);
        loop {
            let x = self.normal();
            let v = 1.0 + c * x;
            if v <= 0.0 {
                continue;
            }
            let v = v * v * v;
            let u = self.uniform_open0();
            if math::ln(u) < 0.5 * x * x + d - d * v + d * math::ln(v) {
                return d * v;
            }
        }
    }

    /// Dirichlet draw from normalized gamma variates.
    pub fn dirichlet(&mut self, alpha: &[f64]) -> alloc::vec::Vec<f64> {
        let g: alloc::vec::Vec<f64> = alpha.iter().map(|&a| self.gamma(a)).collect();
        let total = math::sum(&g);
        g.iter().map(|x| x / total).collect()
    }

    /// Fisher–Yates shuffle walking from the front: position `i` swaps with
    /// a uniform position in `i..len`.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        let n = items.len();
        for i in 0..n.saturating_sub(1) {
            let j = i + self.below((n - i) as u64) as usize;
            items.swap(i, j);
        }
    }
}
