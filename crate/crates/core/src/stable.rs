//! Symmetric alpha-stable side: sampling, the limit `Lambda~(alpha)` of
//! `R~^{2,n}`, its asymptotic variance, and the index estimator.
//!
//! Neither `Lambda~` nor `sigma~^2` has a closed form, so both are tabulated
//! by Monte Carlo ([`psi_chain_moments`]) and stored in a
//! [`LambdaTildeTable`]. The raw table is smoothed by isotonic regression so
//! that it can be inverted.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;

use crate::error::{Error, Result};
use crate::interp::{bisect, isotonic_decreasing, Pchip};
use crate::normal;
use crate::path::SampledPath;
use crate::stats::{r_tilde_2n, IrSummary};

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::Domain {
            what: "stable index alpha",
            value: alpha,
            expected: "0 < alpha <= 2",
        });
    }
    Ok(())
}

/// Uniform on the open interval `(0, 1)`.
#[inline]
pub fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    ((rng.random::<u64>() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// A stable draw as `sign * exp(log_abs)`, so that very small `alpha`
/// (where `|Z|` routinely exceeds `f64::MAX`) stays representable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogDraw {
    pub negative: bool,
    pub log_abs: f64,
}

impl LogDraw {
    pub fn value(self) -> f64 {
        let m = libm::exp(self.log_abs);
        if self.negative {
            -m
        } else {
            m
        }
    }
}

/// `psi` of two draws held in log form.
#[inline]
pub fn psi_log(a: LogDraw, b: LogDraw) -> f64 {
    let (big, small) = if a.log_abs >= b.log_abs {
        (a, b)
    } else {
        (b, a)
    };
    if big.log_abs == f64::NEG_INFINITY {
        return 1.0;
    }
    let ratio = libm::exp(small.log_abs - big.log_abs);
    if big.negative == small.negative {
        1.0
    } else {
        (1.0 - ratio) / (1.0 + ratio)
    }
}

/// Chambers-Mallows-Stuck map for the symmetric case. `v` is uniform on
/// `(-pi/2, pi/2)` and `w` is standard exponential.
pub fn cms_log(alpha: f64, v: f64, w: f64) -> LogDraw {
    if alpha == 1.0 {
        let t = libm::tan(v);
        return LogDraw {
            negative: t < 0.0,
            log_abs: libm::log(libm::fabs(t)),
        };
    }
    let s = libm::sin(alpha * v);
    let log_abs = libm::log(libm::fabs(s)) - libm::log(libm::cos(v)) / alpha
        + (1.0 - alpha) / alpha * (libm::log(libm::cos((1.0 - alpha) * v)) - libm::log(w));
    LogDraw {
        negative: s < 0.0,
        log_abs,
    }
}

/// One draw with characteristic function `exp(-|theta|^alpha)`. For
/// `alpha = 2` this is `N(0, 2)`, for `alpha = 1` standard Cauchy.
///
/// For `alpha` below about `0.1` the result can overflow to infinity.
pub fn sample_sym_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> Result<f64> {
    check_alpha(alpha)?;
    let (v, w) = cms_inputs(rng);
    Ok(cms_log(alpha, v, w).value())
}

#[inline]
fn cms_inputs<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    let v = PI * (open_unit(rng) - 0.5);
    let w = -libm::log(open_unit(rng));
    debug_assert!(v > -FRAC_PI_2 && v < FRAC_PI_2);
    (v, w)
}

/// Moments of the sequence `psi(Z_k, Z_{k+1})` along a chain of iid stable
/// draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiChainMoments {
    pub terms: usize,
    pub mean: f64,
    pub var: f64,
    /// Covariance of neighbouring terms, which share one draw.
    pub lag1_cov: f64,
}

impl PsiChainMoments {
    /// `2 var + 4 cov`: the limit of `n var(R~^{2,n})`.
    pub fn sigma_sq(&self) -> f64 {
        2.0 * self.var + 4.0 * self.lag1_cov
    }
}

/// Runs one chain of `terms + 1` stable draws per `alpha` using common
/// random numbers: draw `k` of every chain comes from the same uniforms.
pub fn psi_chain_moments<R: Rng + ?Sized>(
    alphas: &[f64],
    terms: usize,
    rng: &mut R,
) -> Result<Vec<PsiChainMoments>> {
    for &a in alphas {
        check_alpha(a)?;
    }
    if terms < 2 {
        return Err(Error::Size {
            what: "chain terms",
            needed: 2,
            got: terms,
        });
    }
    let m = alphas.len();
    let (v, w) = cms_inputs(rng);
    let mut prev: Vec<LogDraw> = alphas.iter().map(|&a| cms_log(a, v, w)).collect();
    let mut prev_psi = alloc::vec![f64::NAN; m];
    let mut s1 = alloc::vec![0.0; m];
    let mut s2 = alloc::vec![0.0; m];
    let mut s12 = alloc::vec![0.0; m];
    for k in 0..terms {
        let (v, w) = cms_inputs(rng);
        for i in 0..m {
            let cur = cms_log(alphas[i], v, w);
            let t = psi_log(prev[i], cur);
            s1[i] += t;
            s2[i] += t * t;
            if k > 0 {
                s12[i] += t * prev_psi[i];
            }
            prev_psi[i] = t;
            prev[i] = cur;
        }
    }
    let nf = terms as f64;
    Ok((0..m)
        .map(|i| {
            let mean = s1[i] / nf;
            PsiChainMoments {
                terms,
                mean,
                var: s2[i] / nf - mean * mean,
                lag1_cov: s12[i] / (nf - 1.0) - mean * mean,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableRow {
    pub alpha: f64,
    /// Monte Carlo estimate of `Lambda~(alpha)` before smoothing.
    pub lambda_raw: f64,
    pub lambda_stderr: f64,
    /// Isotonic (nonincreasing in alpha) smoothing of `lambda_raw`.
    pub lambda: f64,
    pub sigma_sq: f64,
    pub sigma_sq_stderr: f64,
    pub dlambda_dalpha: f64,
}

/// Tabulated `Lambda~`, `sigma~^2` and `dLambda~/dalpha` on an alpha grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaTildeTable {
    rows: Vec<StableRow>,
    /// Chain terms per grid point.
    pub reps: usize,
    pub seed: u64,
    curve: Pchip,
}

impl LambdaTildeTable {
    /// Smooths raw estimates and derives the slope column. `raw` holds
    /// `(alpha, lambda, lambda_stderr, sigma_sq, sigma_sq_stderr)` with
    /// strictly increasing alpha.
    pub fn from_estimates(
        raw: &[(f64, f64, f64, f64, f64)],
        reps: usize,
        seed: u64,
    ) -> Result<Self> {
        let lam: Vec<f64> = raw.iter().map(|r| r.1).collect();
        let weights: Vec<f64> = raw.iter().map(|r| 1.0 / (r.2 * r.2).max(1e-24)).collect();
        let smooth = isotonic_decreasing(&lam, &weights);
        let alphas: Vec<f64> = raw.iter().map(|r| r.0).collect();
        let slopes = node_slopes(&alphas, &smooth);
        let rows = raw
            .iter()
            .zip(smooth.iter().zip(&slopes))
            .map(|(r, (&l, &d))| StableRow {
                alpha: r.0,
                lambda_raw: r.1,
                lambda_stderr: r.2,
                lambda: l,
                sigma_sq: r.3,
                sigma_sq_stderr: r.4,
                dlambda_dalpha: d,
            })
            .collect();
        Self::from_rows(rows, reps, seed)
    }

    /// Rebuilds a table from stored rows (for example after loading a file).
    pub fn from_rows(rows: Vec<StableRow>, reps: usize, seed: u64) -> Result<Self> {
        if rows.len() < 3 {
            return Err(Error::Table {
                reason: "need at least three alpha grid points",
            });
        }
        for r in &rows {
            check_alpha(r.alpha).map_err(|_| Error::Table {
                reason: "alpha grid must lie in (0, 2]",
            })?;
            if !(0.5..=1.0).contains(&r.lambda) {
                return Err(Error::Table {
                    reason: "smoothed Lambda~ entries must lie in [1/2, 1]",
                });
            }
            let finite = [
                r.lambda_raw,
                r.lambda_stderr,
                r.sigma_sq,
                r.sigma_sq_stderr,
                r.dlambda_dalpha,
            ]
            .iter()
            .all(|x| x.is_finite());
            if !finite || r.lambda_stderr < 0.0 || r.sigma_sq_stderr < 0.0 {
                return Err(Error::Table {
                    reason: "non-finite entry or negative standard error",
                });
            }
        }
        if rows.windows(2).any(|w| w[1].lambda > w[0].lambda) {
            return Err(Error::Table {
                reason: "smoothed Lambda~ must be nonincreasing in alpha",
            });
        }
        let curve = Pchip::new(
            rows.iter().map(|r| r.alpha).collect(),
            rows.iter().map(|r| r.lambda).collect(),
        )?;
        Ok(Self {
            rows,
            reps,
            seed,
            curve,
        })
    }

    pub fn rows(&self) -> &[StableRow] {
        &self.rows
    }

    pub fn alpha_range(&self) -> (f64, f64) {
        self.curve.domain()
    }

    /// `(min, max)` of the smoothed `Lambda~` column.
    pub fn value_range(&self) -> (f64, f64) {
        (self.rows[self.rows.len() - 1].lambda, self.rows[0].lambda)
    }

    pub fn entry(&self, alpha: f64) -> Option<&StableRow> {
        self.rows
            .iter()
            .find(|r| libm::fabs(r.alpha - alpha) < 1e-9)
    }

    /// Smoothed `Lambda~(alpha)`.
    pub fn lambda_at(&self, alpha: f64) -> Result<f64> {
        self.curve.eval(alpha)
    }

    fn linear(&self, alpha: f64, col: impl Fn(&StableRow) -> f64) -> Result<f64> {
        let (lo, hi) = self.alpha_range();
        if !(alpha >= lo && alpha <= hi) {
            return Err(Error::Interpolation {
                at: alpha,
                low: lo,
                high: hi,
            });
        }
        let i = self
            .rows
            .partition_point(|r| r.alpha <= alpha)
            .saturating_sub(1)
            .min(self.rows.len() - 2);
        let (a, b) = (&self.rows[i], &self.rows[i + 1]);
        let t = (alpha - a.alpha) / (b.alpha - a.alpha);
        Ok(col(a) + t * (col(b) - col(a)))
    }

    pub fn dlambda_at(&self, alpha: f64) -> Result<f64> {
        self.linear(alpha, |r| r.dlambda_dalpha)
    }

    /// `sigma~^2(alpha)`, negative Monte Carlo estimates read as 0.
    pub fn sigma_sq_at(&self, alpha: f64) -> Result<f64> {
        self.linear(alpha, |r| r.sigma_sq.max(0.0))
    }

    /// Grid indices `i` where the raw estimate rises from `i` to `i + 1` by
    /// more than three joint standard errors.
    pub fn monotonicity_violations(&self) -> Vec<usize> {
        self.rows
            .windows(2)
            .enumerate()
            .filter(|(_, w)| {
                let se = libm::sqrt(w[0].lambda_stderr.powi(2) + w[1].lambda_stderr.powi(2));
                w[1].lambda_raw - w[0].lambda_raw > 3.0 * se
            })
            .map(|(i, _)| i)
            .collect()
    }

    /// `alpha` with `Lambda~(alpha) = v` on the smoothed table.
    pub fn invert(&self, v: f64) -> Result<f64> {
        let (low, high) = self.value_range();
        let (a_lo, a_hi) = self.alpha_range();
        if !(v >= low && v <= high) {
            return Err(Error::OutOfRange {
                value: v,
                low,
                high,
                // Lambda~ decreases in alpha
                nearest: if v < low { a_hi } else { a_lo },
            });
        }
        let f = |a: f64| self.curve.eval(a).unwrap_or(f64::NAN) - v;
        Ok(bisect(f, a_lo, a_hi, 1e-10, false))
    }

    /// [`invert`](Self::invert) clamped to the table's alpha range. The flag
    /// is set when clamping happened.
    pub fn invert_clamped(&self, v: f64) -> Result<(f64, bool)> {
        match self.invert(v) {
            Ok(a) => Ok((a, false)),
            Err(Error::OutOfRange { nearest, .. }) if !v.is_nan() => Ok((nearest, true)),
            Err(e) => Err(e),
        }
    }
}

/// Centered differences, one-sided at both ends of the grid.
fn node_slopes(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let m = xs.len();
    (0..m)
        .map(|i| {
            let (a, b) = match i {
                0 => (0, 1),
                _ if i == m - 1 => (m - 2, m - 1),
                _ => (i - 1, i + 1),
            };
            (ys[b] - ys[a]) / (xs[b] - xs[a])
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaEstimate {
    pub alpha_hat: f64,
    /// Asymptotic standard error `sigma~ / (|dLambda~/dalpha| sqrt(n))`.
    pub stderr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub confidence: f64,
    pub statistic: IrSummary,
    pub n: usize,
    /// The statistic fell outside the table and `alpha_hat` sits at a grid end.
    pub clamped: bool,
}

/// Stable index from `R~^{2,n}`, with a delta-method confidence interval.
pub fn estimate_alpha(
    path: &SampledPath,
    table: &LambdaTildeTable,
    confidence: f64,
) -> Result<AlphaEstimate> {
    let n = path.n();
    if n < 16 {
        return Err(Error::Size {
            what: "grid size n for the alpha estimator",
            needed: 16,
            got: n,
        });
    }
    let z = normal::two_sided_z(confidence).ok_or(Error::Domain {
        what: "confidence level",
        value: confidence,
        expected: "0 < conf < 1",
    })?;
    let statistic = r_tilde_2n(path)?;
    let (alpha_hat, clamped) = table.invert_clamped(statistic.value)?;
    let slope = libm::fabs(table.dlambda_at(alpha_hat)?);
    let sigma = libm::sqrt(table.sigma_sq_at(alpha_hat)?);
    let stderr = if slope > 0.0 {
        sigma / slope / libm::sqrt(n as f64)
    } else {
        f64::INFINITY
    };
    Ok(AlphaEstimate {
        alpha_hat,
        stderr,
        ci_low: alpha_hat - z * stderr,
        ci_high: alpha_hat + z * stderr,
        confidence,
        statistic,
        n,
        clamped,
    })
}
