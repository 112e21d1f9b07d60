//! Exploration noise with a linear anneal.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Zero-mean Gaussian action noise whose standard deviation falls
/// linearly from `start` to `end` over `anneal_steps`, then stays at
/// `end` for the rest of training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSchedule {
    pub start: f64,
    pub end: f64,
    pub anneal_steps: u64,
}

impl NoiseSchedule {
    pub fn std_at(&self, step: u64) -> f64 {
        if self.anneal_steps == 0 || step >= self.anneal_steps {
            return self.end;
        }
        let f = step as f64 / self.anneal_steps as f64;
        self.start + (self.end - self.start) * f
    }

    /// One independent draw per vehicle; callers clamp the sum of
    /// policy output and noise to the action bound.
    pub fn sample(&self, rng: &mut ChaCha8Rng, step: u64, n: usize) -> Vec<f64> {
        let normal = Normal::new(0.0, self.std_at(step)).expect("finite std");
        (0..n).map(|_| normal.sample(rng)).collect()
    }
}
