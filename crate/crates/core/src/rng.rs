//! Deterministic random streams.
//!
//! Every stochastic operation draws from a [`RandomStream`]. A stream is a
//! ChaCha20 generator keyed by the 32-byte expansion of `master_seed` and
//! positioned on the 64-bit ChaCha stream `stream_id`. ChaCha is counter
//! based, so distinct stream ids give non-overlapping, independent sequences
//! for the same key.
//!
//! Stream id layout used by the drivers in this workspace:
//!
//! | bits   | meaning                                   |
//! |--------|-------------------------------------------|
//! | 63..32 | purpose tag (see [`StreamPurpose`])       |
//! | 31..0  | index (run number, setting number, ...)   |

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Result, SvError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum StreamPurpose {
    Simulation = 1,
    Chain = 2,
    Geweke = 3,
    Test = 4,
}

/// Builds a stream id from a purpose tag and an index.
pub fn stream_id(purpose: StreamPurpose, index: u32) -> u64 {
    ((purpose as u64) << 32) | index as u64
}

#[derive(Debug, Clone)]
pub struct RandomStream {
    master_seed: u64,
    stream_id: u64,
    rng: ChaCha20Rng,
}

impl RandomStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
        rng.set_stream(stream_id);
        Self {
            master_seed,
            stream_id,
            rng,
        }
    }

    pub fn for_purpose(master_seed: u64, purpose: StreamPurpose, index: u32) -> Self {
        Self::new(master_seed, stream_id(purpose, index))
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform draw on `[0, 1)`.
    #[inline]
    pub fn uniform01(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    #[inline]
    pub fn normal01(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    #[inline]
    pub fn normal(&mut self, mean: f64, sd: f64) -> f64 {
        mean + sd * self.normal01()
    }

    /// Index drawn with probability proportional to `weights`, by inversion
    /// of the cumulative sum with a single uniform.
    pub fn categorical(&mut self, weights: &[f64]) -> Result<usize> {
        let total: f64 = weights.iter().sum();
        if weights.is_empty() || !(total > 0.0) || !total.is_finite() {
            return Err(SvError::Degenerate(
                "categorical weights must be non-negative with a positive finite sum".into(),
            ));
        }
        if weights.iter().any(|&w| w < 0.0) {
            return Err(SvError::Degenerate("negative categorical weight".into()));
        }
        Ok(self.invert_cumulative(weights, total))
    }

    /// Same as [`Self::categorical`] but from log-weights, using
    /// max-subtraction before exponentiating.
    pub fn categorical_log(&mut self, log_weights: &[f64]) -> Result<usize> {
        let max = log_weights
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(SvError::Degenerate(
                "all categorical log-weights are -inf".into(),
            ));
        }
        let weights: Vec<f64> = log_weights.iter().map(|&lw| (lw - max).exp()).collect();
        let total: f64 = weights.iter().sum();
        Ok(self.invert_cumulative(&weights, total))
    }

    fn invert_cumulative(&mut self, weights: &[f64], total: f64) -> usize {
        let target = self.uniform01() * total;
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (k, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                last_positive = k;
            }
            acc += w;
            if target < acc {
                return k;
            }
        }
        // Rounding can leave `target` a hair above the final partial sum.
        last_positive
    }

    /// Direct access for `rand_distr` samplers.
    pub fn rng_mut(&mut self) -> &mut impl RngCore {
        &mut self.rng
    }
}
