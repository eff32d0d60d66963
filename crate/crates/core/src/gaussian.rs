//! Limit functions of the IR statistics for processes whose small-scale
//! behaviour is that of fractional Brownian motion, and the Hurst estimator
//! built on them.
//!
//! For a centred Gaussian pair with correlation `r`, `E psi(U1, U2)` has the
//! closed form [`lambda`]. Consecutive `p`-th order increments of fBm have
//! correlation [`rho_p`], so `R^{p,n}` converges to
//! `Lambda_p(H) = lambda(rho_p(H))`.

use core::f64::consts::{LN_2, PI};

use crate::error::{Error, Result};
use crate::interp::bisect;
use crate::normal;
use crate::path::SampledPath;
use crate::stats::{r_pn, IrSummary};
use crate::variance_table::VarianceTable;

const LN_3: f64 = 1.098_612_288_668_109_8;

/// Absolute tolerance in `H` of [`invert_lambda2`].
pub const INVERSION_TOL: f64 = 1e-10;

/// Open range of `Lambda_2` over `H in (0, 1)`: `(lambda(-2/3), lambda(rho_2(1-)))`.
pub const LAMBDA2_RANGE: (f64, f64) = (0.522_781_928_203_144_3, 0.669_825_507_005_970_9);

fn check_r(r: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&r) {
        return Err(Error::Domain {
            what: "correlation r",
            value: r,
            expected: "-1 <= r <= 1",
        });
    }
    Ok(())
}

fn check_h(h: f64) -> Result<()> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::Domain {
            what: "Hurst exponent H",
            value: h,
            expected: "0 < H < 1",
        });
    }
    Ok(())
}

fn check_order(p: usize) -> Result<()> {
    if p != 1 && p != 2 {
        return Err(Error::Domain {
            what: "increment order p",
            value: p as f64,
            expected: "p in {1, 2}",
        });
    }
    Ok(())
}

/// `E psi(U1, U2)` for standard normals with correlation `r`:
/// `arccos(-r)/pi + sqrt((1+r)/(1-r)) log(2/(1+r))/pi`.
pub fn lambda(r: f64) -> Result<f64> {
    check_r(r)?;
    if r == 1.0 {
        return Ok(1.0);
    }
    if r == -1.0 {
        return Ok(0.0);
    }
    // log(2/(1+r)) = -log1p((r-1)/2)
    let log_term = -libm::log1p(0.5 * (r - 1.0));
    Ok(libm::acos(-r) / PI + libm::sqrt((1.0 + r) / (1.0 - r)) * log_term / PI)
}

/// `E psi0(U1, U2) = arccos(-r)/pi`, the sign-persistence probability.
pub fn lambda0(r: f64) -> Result<f64> {
    check_r(r)?;
    Ok(libm::acos(-r) / PI)
}

/// Correlation of consecutive unit-grid `p`-th order increments of fBm,
/// `p in {1, 2}`:
/// `rho_1 = 2^(2H-1) - 1`, `rho_2 = (-3^(2H) + 2^(2H+2) - 7) / (8 - 2^(2H+1))`.
pub fn rho_p(p: usize, h: f64) -> Result<f64> {
    check_order(p)?;
    check_h(h)?;
    Ok(match p {
        1 => libm::expm1((2.0 * h - 1.0) * LN_2),
        _ => {
            // rewritten around H = 1, where the displayed form is 0/0
            let a = libm::expm1(2.0 * (h - 1.0) * LN_3);
            let b = libm::expm1(2.0 * (h - 1.0) * LN_2);
            (16.0 * b - 9.0 * a) / (-8.0 * b)
        }
    })
}

/// `Lambda_p(H) = lambda(rho_p(H))`, the limit of `R^{p,n}` for an
/// fBm-tangent path with exponent `H`.
pub fn lambda_p(p: usize, h: f64) -> Result<f64> {
    lambda(rho_p(p, h)?)
}

/// Inverse of `Lambda_2` by bisection on `(0, 1)`.
pub fn invert_lambda2(v: f64) -> Result<f64> {
    let (low, high) = LAMBDA2_RANGE;
    if !(v > low && v < high) {
        return Err(Error::OutOfRange {
            value: v,
            low,
            high,
            nearest: if v <= low { 0.0 } else { 1.0 },
        });
    }
    let f = |h: f64| lambda_p(2, h).map(|l| l - v).unwrap_or(f64::NAN);
    Ok(bisect(f, 0.0, 1.0, INVERSION_TOL, true))
}

/// Covariance at lag `j` of unit-grid `p`-th order increments of standard
/// fBm (`E B_H(t)^2 = |t|^(2H)`).
pub fn fbm_increment_cov(p: usize, h: f64, j: i64) -> Result<f64> {
    check_order(p)?;
    check_h(h)?;
    let e = 2.0 * h;
    let v = |k: i64| libm::pow(libm::fabs(k as f64), e);
    Ok(match p {
        1 => 0.5 * (v(j + 1) + v(j - 1) - 2.0 * v(j)),
        _ => 0.5 * (-v(j + 2) + 4.0 * v(j + 1) - 6.0 * v(j) + 4.0 * v(j - 1) - v(j - 2)),
    })
}

/// Squared derivative of `Lambda_2^{-1}` at `Lambda_2(H)`, written out in
/// closed form: `(pi (8-2^(2H+1))^2 (1-rho) sqrt(1-rho^2) /
/// ((log 2 - log(1+rho)) (2^(2H+2) 9 log 2 - 3^(2H) 16 log 3 + 6^(2H) 4 log(3/2))))^2`
/// with `rho = rho_2(H)`.
pub fn s2_prefactor(h: f64) -> Result<f64> {
    let rho = rho_p(2, h)?;
    let e = 2.0 * h;
    let d = 8.0 - libm::pow(2.0, e + 1.0);
    let num = PI * d * d * (1.0 - rho) * libm::sqrt(1.0 - rho * rho);
    let den = (LN_2 - libm::log1p(rho))
        * (libm::pow(2.0, e + 2.0) * 9.0 * LN_2 - libm::pow(3.0, e) * 16.0 * LN_3
            + libm::pow(6.0, e) * 4.0 * libm::log(1.5));
    let f = num / den;
    Ok(f * f)
}

/// Delta-method asymptotic variance `s_2^2(H)` of `Lambda_2^{-1}(R^{2,n})`
/// given the asymptotic variance `sigma2` of `R^{2,n}`.
pub fn s2_sq(h: f64, sigma2: f64) -> Result<f64> {
    if !(sigma2 >= 0.0) || !sigma2.is_finite() {
        return Err(Error::Domain {
            what: "Sigma_2",
            value: sigma2,
            expected: "finite and >= 0",
        });
    }
    Ok(s2_prefactor(h)? * sigma2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HurstEstimate {
    pub h_hat: f64,
    /// Asymptotic standard error `s_2(h_hat) / sqrt(n)`.
    pub stderr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub confidence: f64,
    pub statistic: IrSummary,
    pub n: usize,
}

/// Hurst exponent from `R^{2,n}` with a normal confidence interval.
pub fn estimate_h(
    path: &SampledPath,
    table: &VarianceTable,
    confidence: f64,
) -> Result<HurstEstimate> {
    let n = path.n();
    if n < 16 {
        return Err(Error::Size {
            what: "grid size n for the Hurst estimator",
            needed: 16,
            got: n,
        });
    }
    let z = normal::two_sided_z(confidence).ok_or(Error::Domain {
        what: "confidence level",
        value: confidence,
        expected: "0 < conf < 1",
    })?;
    let statistic = r_pn(path, 2)?;
    let h_hat = invert_lambda2(statistic.value)?;
    let sigma2 = table.sigma_at(2, h_hat)?;
    let stderr = libm::sqrt(s2_sq(h_hat, sigma2)? / n as f64);
    Ok(HurstEstimate {
        h_hat,
        stderr,
        ci_low: h_hat - z * stderr,
        ci_high: h_hat + z * stderr,
        confidence,
        statistic,
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_examples() {
        assert_eq!(lambda(-1.0).unwrap(), 0.0);
        assert_eq!(lambda(1.0).unwrap(), 1.0);
        let mid = 0.5 + LN_2 / PI;
        assert!((lambda(0.0).unwrap() - mid).abs() < 1e-15);
        assert!((lambda(0.0).unwrap() - 0.72064).abs() < 1e-5);
        assert!(matches!(lambda(1.0 + 1e-12), Err(Error::Domain { .. })));
        assert!(matches!(lambda(f64::NAN), Err(Error::Domain { .. })));
        // continuity at the endpoints
        assert!(lambda(-1.0 + 1e-12).unwrap() < 1e-5);
        assert!(1.0 - lambda(1.0 - 1e-12).unwrap() < 1e-5);
    }

    #[test]
    fn lambda_strictly_increasing_on_grid() {
        let m = 10_000;
        let mut prev = lambda(-1.0).unwrap();
        for i in 1..=m {
            let r = -1.0 + 2.0 * i as f64 / m as f64;
            let cur = lambda(r).unwrap();
            assert!(cur > prev, "not increasing at r = {r}");
            prev = cur;
        }
    }

    #[test]
    fn lambda0_examples() {
        assert_eq!(lambda0(0.0).unwrap(), 0.5);
        assert_eq!(lambda0(1.0).unwrap(), 1.0);
        assert_eq!(lambda0(-1.0).unwrap(), 0.0);
        assert!(lambda0(2.0).is_err());
    }

    #[test]
    fn rho_examples() {
        assert_eq!(rho_p(1, 0.5).unwrap(), 0.0);
        assert!((rho_p(2, 0.5).unwrap() + 0.5).abs() < 1e-15);
        assert!((rho_p(1, 1.0 - 1e-12).unwrap() - 1.0).abs() < 1e-9);
        // the p = 2 form is 0/0 at H = 1; its limit is not 0
        let limit = (18.0 * LN_3 - 32.0 * LN_2) / (16.0 * LN_2);
        assert!((rho_p(2, 1.0 - 1e-12).unwrap() - limit).abs() < 1e-9);
        assert!((limit + 0.2169).abs() < 1e-4);
        assert!((rho_p(2, 1e-15).unwrap() + 2.0 / 3.0).abs() < 1e-12);
        assert!(rho_p(3, 0.5).is_err());
        assert!(rho_p(1, 1.0).is_err());
        assert!(rho_p(2, 0.0).is_err());
    }

    #[test]
    fn rho_matches_covariance_ratio() {
        for i in 1..20 {
            let h = i as f64 / 20.0;
            for p in 1..=2 {
                let c0 = fbm_increment_cov(p, h, 0).unwrap();
                let c1 = fbm_increment_cov(p, h, 1).unwrap();
                assert!((c1 / c0 - rho_p(p, h).unwrap()).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn anchor_values() {
        assert!((lambda_p(1, 0.5).unwrap() - 0.7206).abs() < 5e-4);
        assert!((lambda_p(2, 0.5).unwrap() - 0.5881).abs() < 5e-4);
    }

    #[test]
    fn range_constant_matches_limits() {
        let lo = lambda(-2.0 / 3.0).unwrap();
        let hi = lambda((18.0 * LN_3 - 32.0 * LN_2) / (16.0 * LN_2)).unwrap();
        assert!((LAMBDA2_RANGE.0 - lo).abs() < 1e-14);
        assert!((LAMBDA2_RANGE.1 - hi).abs() < 1e-14);
    }

    #[test]
    fn lambda2_linear_fit() {
        let hs: alloc::vec::Vec<f64> = (1..=19).map(|i| 0.05 * i as f64).collect();
        let ys: alloc::vec::Vec<f64> = hs.iter().map(|&h| lambda_p(2, h).unwrap()).collect();
        let m = hs.len() as f64;
        let mx = hs.iter().sum::<f64>() / m;
        let my = ys.iter().sum::<f64>() / m;
        let sxy: f64 = hs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = hs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        assert!((slope - 0.1468).abs() < 0.005, "slope {slope}");
        assert!((intercept - 0.5174).abs() < 0.005, "intercept {intercept}");
    }

    #[test]
    fn inversion() {
        let v = lambda_p(2, 0.3).unwrap();
        assert!((invert_lambda2(v).unwrap() - 0.3).abs() < 1e-9);
        assert!((invert_lambda2(0.5881).unwrap() - 0.5).abs() < 1e-3);
        match invert_lambda2(0.99) {
            Err(Error::OutOfRange { nearest, high, .. }) => {
                assert_eq!(nearest, 1.0);
                assert_eq!(high, LAMBDA2_RANGE.1);
            }
            other => panic!("expected range error, got {other:?}"),
        }
        assert!(matches!(
            invert_lambda2(0.4),
            Err(Error::OutOfRange { nearest, .. }) if nearest == 0.0
        ));
        for i in 1..100 {
            let h = i as f64 / 100.0;
            let v = lambda_p(2, h).unwrap();
            let back = invert_lambda2(v).unwrap();
            assert!((back - h).abs() < 1e-9);
            assert!((lambda_p(2, back).unwrap() - v).abs() < 1e-9);
        }
    }

    #[test]
    fn covariance_examples() {
        assert_eq!(fbm_increment_cov(1, 0.5, 1).unwrap(), 0.0);
        for i in 1..10 {
            let h = i as f64 / 10.0;
            assert!((fbm_increment_cov(1, h, 0).unwrap() - 1.0).abs() < 1e-15);
            let v2 = fbm_increment_cov(2, h, 0).unwrap();
            assert!((v2 - (4.0 - libm::pow(4.0, h))).abs() < 1e-14);
        }
        assert!((fbm_increment_cov(2, 0.5, 0).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(
            fbm_increment_cov(2, 0.3, 4).unwrap(),
            fbm_increment_cov(2, 0.3, -4).unwrap()
        );
    }

    fn lambda2_derivative(h: f64) -> f64 {
        let step = 1e-6;
        (lambda_p(2, h + step).unwrap() - lambda_p(2, h - step).unwrap()) / (2.0 * step)
    }

    #[test]
    fn s2_prefactor_is_inverse_squared_derivative() {
        let fd = 1.0 / (lambda2_derivative(0.5) * lambda2_derivative(0.5));
        let closed = s2_prefactor(0.5).unwrap();
        assert!(((closed - fd) / fd).abs() < 1e-4, "{closed} vs {fd}");
        for i in 2..=18 {
            let h = i as f64 / 20.0;
            let d = lambda2_derivative(h);
            let fd = 1.0 / (d * d);
            assert!(((s2_prefactor(h).unwrap() - fd) / fd).abs() < 1e-4);
        }
    }

    #[test]
    fn s2_sq_basics() {
        assert_eq!(s2_sq(0.4, 0.0).unwrap(), 0.0);
        assert!(s2_sq(0.4, -1.0).is_err());
        assert!(s2_sq(1.2, 1.0).is_err());
        // continuous, finite on [0.1, 0.9]
        let mut prev = s2_prefactor(0.1).unwrap();
        for i in 101..=900 {
            let h = i as f64 / 1000.0;
            let cur = s2_prefactor(h).unwrap();
            assert!(cur.is_finite() && cur > 0.0);
            assert!((cur - prev).abs() / prev < 0.01);
            prev = cur;
        }
    }
}
