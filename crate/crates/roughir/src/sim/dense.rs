//! Gaussian vectors from a dense covariance factor.

use faer::{Mat, Side};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Lower Cholesky factor of a covariance matrix, stored packed by columns.
#[derive(Debug, Clone)]
pub struct DenseGaussian {
    dim: usize,
    /// column `k` holds rows `k..dim`
    packed: Vec<f64>,
    offsets: Vec<usize>,
    /// Relative diagonal jitter that was needed, 0 when none.
    pub jitter: f64,
}

const JITTERS: [f64; 4] = [0.0, 1e-12, 1e-10, 1e-8];

impl DenseGaussian {
    /// Factors the `dim x dim` leading block of `cov`. On failure retries
    /// with increasing relative jitter on the diagonal before giving up.
    pub fn factor(mut cov: Mat<f64>, dim: usize) -> Result<Self> {
        if cov.nrows() < dim || cov.ncols() < dim {
            return Err(Error::Factorization(
                "covariance smaller than requested block".into(),
            ));
        }
        let mean_diag = (0..dim).map(|i| cov[(i, i)]).sum::<f64>() / dim as f64;
        if !(mean_diag > 0.0) || !mean_diag.is_finite() {
            return Err(Error::Factorization(format!(
                "covariance diagonal mean is {mean_diag}"
            )));
        }
        let mut applied = 0.0;
        for jitter in JITTERS {
            let add = (jitter - applied) * mean_diag;
            if add > 0.0 {
                for i in 0..dim {
                    cov[(i, i)] += add;
                }
                applied = jitter;
            }
            let block = cov.as_ref().submatrix(0, 0, dim, dim);
            if let Ok(llt) = block.llt(Side::Lower) {
                drop(cov);
                let l = llt.L();
                let mut packed = Vec::with_capacity(dim * (dim + 1) / 2);
                let mut offsets = Vec::with_capacity(dim);
                for k in 0..dim {
                    offsets.push(packed.len());
                    packed.extend((k..dim).map(|i| l[(i, k)]));
                }
                return Ok(Self {
                    dim,
                    packed,
                    offsets,
                    jitter,
                });
            }
        }
        Err(Error::Factorization(format!(
            "not positive definite even with relative diagonal jitter {:e}",
            JITTERS[JITTERS.len() - 1]
        )))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `L z` for a fresh standard normal vector `z`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z: Vec<f64> = (0..self.dim).map(|_| rng.sample(StandardNormal)).collect();
        self.apply(&z)
    }

    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (k, &zk) in z.iter().enumerate().take(self.dim) {
            let col = &self.packed[self.offsets[k]..self.offsets[k] + self.dim - k];
            for (o, l) in out[k..].iter_mut().zip(col) {
                *o += l * zk;
            }
        }
        out
    }
}
