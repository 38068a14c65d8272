//! Deterministic low-discrepancy sampling of frequency vectors.
//!
//! Measure-fraction estimates converge much faster on an additive-recurrence
//! (generalized golden ratio) sequence than on pseudo-random draws, and the
//! sequence is reproducible by construction. A seed enters only through a
//! Cranley–Patterson rotation, so two seeds give shifted copies of the same
//! point set.

/// n-dimensional additive-recurrence sequence on `[0, 2π)^n`.
#[derive(Debug, Clone)]
pub struct OmegaSampler {
    alphas: Vec<f64>,
    shift: Vec<f64>,
    pub n: usize,
    pub seed: u64,
}

impl OmegaSampler {
    pub fn new(n: usize, seed: u64) -> Self {
        assert!(n >= 1);
        let phi = generalized_golden(n);
        let mut alphas = Vec::with_capacity(n);
        let mut a = 1.0;
        for _ in 0..n {
            a /= phi;
            alphas.push(a);
        }
        let mut state = seed;
        let shift = (0..n)
            .map(|_| (splitmix64(&mut state) >> 11) as f64 / (1u64 << 53) as f64)
            .collect();
        OmegaSampler {
            alphas,
            shift,
            n,
            seed,
        }
    }

    /// The `idx`-th point, each coordinate in `[0, 2π)`.
    pub fn point(&self, idx: u64) -> Vec<f64> {
        let k = (idx + 1) as f64;
        self.alphas
            .iter()
            .zip(&self.shift)
            .map(|(&a, &s)| {
                let v = (0.5 + s + k * a).fract();
                v * std::f64::consts::TAU
            })
            .collect()
    }
}

/// Root of `x^{n+1} = x + 1`, the plastic-style constant driving the
/// recurrence.
fn generalized_golden(n: usize) -> f64 {
    let p = n as f64 + 1.0;
    let mut x = 1.5f64;
    for _ in 0..64 {
        let f = x.powf(p) - x - 1.0;
        let df = p * x.powf(p - 1.0) - 1.0;
        let step = f / df;
        x -= step;
        if step.abs() < 1e-16 {
            break;
        }
    }
    x
}

pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Small deterministic PRNG for the verification suites (uniform in
/// `[-1, 1]`); not used anywhere statistical quality matters.
#[derive(Debug, Clone)]
pub struct SmallRng {
    state: u64,
}

impl SmallRng {
    pub fn new(seed: u64) -> Self {
        SmallRng { state: seed }
    }

    pub fn next_f64(&mut self) -> f64 {
        (splitmix64(&mut self.state) >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }

    pub fn next_unit(&mut self) -> f64 {
        (splitmix64(&mut self.state) >> 11) as f64 / (1u64 << 53) as f64
    }
}
