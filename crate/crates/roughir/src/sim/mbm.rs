//! Multifractional Brownian motion from its harmonizable covariance.
//!
//! With `h = H(t) + H(s)` the covariance is
//! `C(t,s) = D(H(t),H(s)) / 2 * (t^h + s^h - |t-s|^h)` where
//! `D(x,y) = sqrt(G(x) G(y)) / (Gamma(x+y+1) sin(pi (x+y) / 2))` and
//! `G(x) = Gamma(2x+1) sin(pi x)`. This normalization gives
//! `E X_t^2 = t^(2H(t))`, so a constant `H` reproduces fBm exactly.

use std::f64::consts::PI;

use faer::Mat;
use libm::tgamma;
use rand::Rng;
use roughir_core::SampledPath;

use super::dense::DenseGaussian;
use super::func::Func;
use super::{check_hurst, check_n};
use crate::error::Result;

/// Largest grid accepted by default; the dense factor costs O(n^3) time and
/// O(n^2) memory.
pub const MBM_MAX_N: usize = 1 << 13;

/// Number of points on which `H` is checked to lie in (0, 1).
const CHECK_GRID: usize = 4096;

fn g(x: f64) -> f64 {
    tgamma(2.0 * x + 1.0) * (PI * x).sin()
}

/// Harmonizable mBm covariance for given exponents at `t` and `s`.
pub fn mbm_cov(t: f64, ht: f64, s: f64, hs: f64) -> f64 {
    let sum = ht + hs;
    let d = if ht == hs {
        1.0
    } else {
        (g(ht) * g(hs)).sqrt() / (tgamma(sum + 1.0) * (PI * sum / 2.0).sin())
    };
    0.5 * d * (t.powf(sum) + s.powf(sum) - (t - s).abs().powf(sum))
}

/// Validated exponent values `H(j/n)` for `j = 0..=n`.
fn exponents(n: usize, h: &Func) -> Result<Vec<f64>> {
    for i in 0..=CHECK_GRID {
        check_hurst(h.eval(i as f64 / CHECK_GRID as f64))?;
    }
    let hs: Vec<f64> = (0..=n).map(|j| h.eval(j as f64 / n as f64)).collect();
    for &v in &hs {
        check_hurst(v)?;
    }
    Ok(hs)
}

/// Covariance of the `n` increments `X_{j/n} - X_{(j-1)/n}`, held in the
/// leading `n x n` block of an `(n+1) x (n+1)` matrix.
pub fn increment_cov(n: usize, h: &Func) -> Result<Mat<f64>> {
    let hs = exponents(n, h)?;
    let m = n + 1;
    let mut c = Mat::<f64>::zeros(m, m);
    for i in 1..m {
        let ti = i as f64 / n as f64;
        for j in 1..=i {
            let v = mbm_cov(ti, hs[i], j as f64 / n as f64, hs[j]);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    // difference rows, then columns, shifting the result into the leading
    // n x n block
    for i in 0..n {
        for j in 0..m {
            c[(i, j)] = c[(i + 1, j)] - c[(i, j)];
        }
    }
    for j in 0..n {
        for i in 0..m {
            c[(i, j)] = c[(i, j + 1)] - c[(i, j)];
        }
    }
    Ok(c)
}

/// Factored mBm sampler for a fixed grid and exponent function.
pub struct MbmGenerator {
    factor: DenseGaussian,
}

impl MbmGenerator {
    pub fn new(n: usize, h: &Func) -> Result<Self> {
        Self::with_limit(n, h, MBM_MAX_N)
    }

    /// As [`MbmGenerator::new`] with a caller-chosen grid size cap.
    pub fn with_limit(n: usize, h: &Func, max_n: usize) -> Result<Self> {
        check_n(n, 2)?;
        if n > max_n {
            return Err(roughir_core::Error::Size {
                what: "mBm grid size (dense factorization limit)",
                needed: max_n,
                got: n,
            }
            .into());
        }
        let cov = increment_cov(n, h)?;
        Ok(Self {
            factor: DenseGaussian::factor(cov, n)?,
        })
    }

    /// Relative diagonal jitter used by the factorization.
    pub fn jitter(&self) -> f64 {
        self.factor.jitter
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SampledPath {
        let incs = self.factor.sample(rng);
        let mut values = Vec::with_capacity(incs.len() + 1);
        let mut x = 0.0;
        values.push(0.0);
        for d in incs {
            x += d;
            values.push(x);
        }
        SampledPath::new(values).expect("finite Gaussian path")
    }
}

pub fn sim_mbm<R: Rng + ?Sized>(n: usize, h: &Func, rng: &mut R) -> Result<SampledPath> {
    Ok(MbmGenerator::new(n, h)?.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_exponent_is_fbm() {
        // increment covariance vs the fractional Gaussian noise closed form
        let n = 64;
        for h in [0.2, 0.5, 0.8] {
            let c = increment_cov(n, &Func::constant(h)).unwrap();
            let scale = (n as f64).powf(-2.0 * h);
            for i in 0..n {
                for j in 0..n {
                    let want = scale * super::super::fbm::fgn_cov(h, i.abs_diff(j));
                    assert!((c[(i, j)] - want).abs() < 1e-12, "{h} {i} {j}");
                }
            }
        }
    }

    #[test]
    fn variance_convention() {
        let h = Func::ramp(0.3, 0.7);
        for t in [0.1, 0.5, 0.9] {
            let ht = h.eval(t);
            assert!((mbm_cov(t, ht, t, ht) - t.powf(2.0 * ht)).abs() < 1e-15);
        }
    }

    #[test]
    fn cross_factor_is_at_most_one() {
        // D(x, y) <= 1 is what makes the covariance valid
        for i in 1..20 {
            for j in 1..20 {
                let (x, y) = (i as f64 / 20.0, j as f64 / 20.0);
                let d = (g(x) * g(y)).sqrt() / (tgamma(x + y + 1.0) * (PI * (x + y) / 2.0).sin());
                assert!(d <= 1.0 + 1e-12, "{x} {y} {d}");
            }
        }
    }

    #[test]
    fn rejects_out_of_range_exponent() {
        assert!(MbmGenerator::new(32, &Func::ramp(0.5, 1.0)).is_err());
        assert!(MbmGenerator::with_limit(64, &Func::constant(0.5), 32).is_err());
    }
}
