use alloc::vec::Vec;

use crate::error::{Error, Result};

/// An equispaced sample `f(0/n), f(1/n), ..., f(n/n)` of one path.
///
/// Construction rejects non-finite values, so every statistic downstream
/// operates on finite input.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    values: Vec<f64>,
}

impl SampledPath {
    /// Wraps `n + 1` samples. At least two samples are required.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Size {
                what: "path samples",
                needed: 2,
                got: values.len(),
            });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(Self { values })
    }

    /// Samples `f` on the grid `j/n`, `j = 0..=n`.
    pub fn from_fn(n: usize, mut f: impl FnMut(f64) -> f64) -> Result<Self> {
        let values = (0..=n).map(|j| f(j as f64 / n as f64)).collect();
        Self::new(values)
    }

    /// Grid size: the path holds `n + 1` samples.
    #[inline]
    pub fn n(&self) -> usize {
        self.values.len() - 1
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Time of sample `j`, i.e. `j / n`.
    #[inline]
    pub fn time(&self, j: usize) -> f64 {
        j as f64 / self.n() as f64
    }

    /// Pointwise map, re-validated.
    pub fn map(&self, mut f: impl FnMut(f64, f64) -> f64) -> Result<Self> {
        let n = self.n() as f64;
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(j, &x)| f(j as f64 / n, x))
            .collect();
        Self::new(values)
    }

    /// Keeps the first `n + 1` samples.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        let keep = (n + 1).min(self.values.len());
        Self::new(self.values[..keep].to_vec())
    }
}
