//! Uniform sampling grid for waveforms and mode functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform time grid with points `t_k = k * dt`, `k = 0..n_samp-1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    n_samp: usize,
    dt: f64,
}

impl TimeGrid {
    pub fn new(n_samp: usize, dt: f64) -> Result<Self> {
        if n_samp < 2 {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least 2 samples, got {n_samp}"
            )));
        }
        if !dt.is_finite() || dt <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "dt must be positive, got {dt}"
            )));
        }
        Ok(Self { n_samp, dt })
    }

    pub fn n_samp(&self) -> usize {
        self.n_samp
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Total window duration `n_samp * dt`.
    pub fn duration(&self) -> f64 {
        self.n_samp as f64 * self.dt
    }

    pub fn t(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_samp).map(move |k| self.t(k))
    }
}
