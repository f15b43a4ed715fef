//! Deterministic Brownian increment streams.
//!
//! Each path owns a ChaCha stream selected by `(seed, stream_index)`, so the
//! increments of a path do not depend on how paths are scheduled across
//! threads. A stream can also be *refined*: a coarse increment is the sum of
//! `substeps` consecutive fine increments, which puts runs at different step
//! sizes on the same Brownian path.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Debug, Clone)]
pub struct NoiseStream {
    rng: Option<ChaCha8Rng>,
    fine_scale: f64,
    substeps: u32,
    sign: f64,
    dt: f64,
}

impl NoiseStream {
    /// Standard normal increments scaled by `sqrt(dt)`.
    pub fn gaussian(seed: u64, stream_index: u64, dt: f64) -> Self {
        Self::refined(seed, stream_index, dt, 1)
    }

    /// Increments over `substeps * fine_dt`, each the sum of `substeps` fine increments.
    pub fn refined(seed: u64, stream_index: u64, fine_dt: f64, substeps: u32) -> Self {
        assert!(substeps >= 1, "substeps must be >= 1");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_index);
        Self {
            rng: Some(rng),
            fine_scale: fine_dt.sqrt(),
            substeps,
            sign: 1.0,
            dt: fine_dt * f64::from(substeps),
        }
    }

    /// The zero driver: every increment is exactly 0.
    pub fn zero(dt: f64) -> Self {
        Self {
            rng: None,
            fine_scale: 0.0,
            substeps: 1,
            sign: 1.0,
            dt,
        }
    }

    /// The antithetic partner of this stream.
    pub fn negated(mut self) -> Self {
        self.sign = -self.sign;
        self
    }

    /// Step size the increments correspond to.
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn is_zero(&self) -> bool {
        self.rng.is_none()
    }

    pub fn next_increment(&mut self) -> f64 {
        let Some(rng) = self.rng.as_mut() else {
            return 0.0;
        };
        let mut sum = 0.0;
        for _ in 0..self.substeps {
            let z: f64 = StandardNormal.sample(rng);
            sum += self.fine_scale * z;
        }
        self.sign * sum
    }
}
