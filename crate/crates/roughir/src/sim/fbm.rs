//! Fractional Brownian motion on the grid `j/n` by circulant embedding of
//! the fractional Gaussian noise covariance.

use std::sync::Arc;

use faer::Mat;
use rand::Rng;
use rand_distr::StandardNormal;
use roughir_core::SampledPath;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::check_hurst;
use super::dense::DenseGaussian;
use crate::error::Result;

/// Autocovariance of unit-lag fractional Gaussian noise.
pub fn fgn_cov(h: f64, k: usize) -> f64 {
    let k = k as f64;
    let e = 2.0 * h;
    0.5 * ((k + 1.0).powf(e) - 2.0 * k.powf(e) + (k - 1.0).abs().powf(e))
}

enum Method {
    Circulant {
        sqrt_eig: Vec<f64>,
        fft: Arc<dyn Fft<f64>>,
    },
    Dense(DenseGaussian),
}

/// Reusable sampler for `B_H(j/n)`, `j = 0..=n`, with `B_H(0) = 0` and
/// `E B_H(t)^2 = t^(2H)`.
pub struct FbmGenerator {
    n: usize,
    h: f64,
    scale: f64,
    method: Method,
}

impl FbmGenerator {
    pub fn new(n: usize, h: f64) -> Result<Self> {
        check_hurst(h)?;
        super::check_n(n, 2)?;
        let scale = (n as f64).powf(-h);
        let m = 2 * n;
        let mut row: Vec<Complex<f64>> = (0..m)
            .map(|j| {
                let lag = if j <= n { j } else { m - j };
                Complex::new(fgn_cov(h, lag), 0.0)
            })
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(m);
        fft.process(&mut row);
        let max = row.iter().map(|c| c.re).fold(0.0, f64::max);
        let method = if row.iter().all(|c| c.re >= -1e-10 * max) {
            Method::Circulant {
                sqrt_eig: row
                    .iter()
                    .map(|c| (c.re.max(0.0) / m as f64).sqrt())
                    .collect(),
                fft,
            }
        } else {
            let cov = Mat::from_fn(n, n, |i, j| fgn_cov(h, i.abs_diff(j)));
            Method::Dense(DenseGaussian::factor(cov, n)?)
        };
        Ok(Self {
            n,
            h,
            scale,
            method,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn hurst(&self) -> f64 {
        self.h
    }

    pub fn uses_circulant(&self) -> bool {
        matches!(self.method, Method::Circulant { .. })
    }

    /// Two independent paths from one embedding draw.
    pub fn sample_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> (SampledPath, SampledPath) {
        match &self.method {
            Method::Circulant { sqrt_eig, fft } => {
                let mut buf: Vec<Complex<f64>> = sqrt_eig
                    .iter()
                    .map(|s| {
                        let re: f64 = rng.sample(StandardNormal);
                        let im: f64 = rng.sample(StandardNormal);
                        Complex::new(s * re, s * im)
                    })
                    .collect();
                fft.process(&mut buf);
                let re = buf[..self.n].iter().map(|c| c.re);
                let im = buf[..self.n].iter().map(|c| c.im);
                (self.integrate(re), self.integrate(im))
            }
            Method::Dense(g) => {
                let a = g.sample(rng);
                let b = g.sample(rng);
                (self.integrate(a.into_iter()), self.integrate(b.into_iter()))
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SampledPath {
        self.sample_pair(rng).0
    }

    fn integrate(&self, noise: impl Iterator<Item = f64>) -> SampledPath {
        let mut values = Vec::with_capacity(self.n + 1);
        let mut x = 0.0;
        values.push(0.0);
        for z in noise {
            x += self.scale * z;
            values.push(x);
        }
        SampledPath::new(values).expect("finite Gaussian path")
    }
}

/// One fBm path with `B_H(0) = 0` on the grid `j/n`.
pub fn sim_fbm<R: Rng + ?Sized>(n: usize, h: f64, rng: &mut R) -> Result<SampledPath> {
    Ok(FbmGenerator::new(n, h)?.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn embedding_is_nonnegative_across_h() {
        for i in 1..20 {
            let g = FbmGenerator::new(256, i as f64 / 20.0).unwrap();
            assert!(g.uses_circulant());
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(FbmGenerator::new(100, 1.2).is_err());
        assert!(FbmGenerator::new(100, 0.0).is_err());
        assert!(FbmGenerator::new(1, 0.5).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let g = FbmGenerator::new(512, 0.3).unwrap();
        let a = g.sample(&mut seed::rng(3, seed::stream::TEST, 0));
        let b = g.sample(&mut seed::rng(3, seed::stream::TEST, 0));
        assert_eq!(a, b);
        assert_eq!(a.values()[0], 0.0);
        assert_eq!(a.n(), 512);
    }
}
