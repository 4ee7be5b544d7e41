//! Counter-based random numbers: every draw is a pure function of
//! `(seed, domain, trajectory, step, component)`.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// Stream tag for initial-condition sampling.
pub const SAMPLING_DOMAIN: u64 = 1;
/// Stream tag for Brownian increments.
pub const NOISE_DOMAIN: u64 = 2;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// SplitMix64 finalizer chained over the counter words.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterRng {
    seed: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn bits(&self, domain: u64, trajectory: u64, step: u64, component: u64) -> u64 {
        let mut h = mix(self.seed.wrapping_add(GOLDEN));
        for word in [domain, trajectory, step, component] {
            h = mix(h ^ mix(word.wrapping_add(GOLDEN)));
        }
        h
    }

    /// Uniform on the open interval `(0, 1)`.
    pub fn uniform(&self, domain: u64, trajectory: u64, step: u64, component: u64) -> f64 {
        ((self.bits(domain, trajectory, step, component) >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal by Box–Muller from the uniforms at slots `2c` and `2c + 1`.
    pub fn normal(&self, domain: u64, trajectory: u64, step: u64, component: u64) -> f64 {
        let u1 = self.uniform(domain, trajectory, step, 2 * component);
        let u2 = self.uniform(domain, trajectory, step, 2 * component + 1);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}
