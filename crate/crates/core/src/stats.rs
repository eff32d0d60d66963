//! Increment-ratio statistics.
//!
//! Every statistic here averages a 0-homogeneous kernel of two neighbouring
//! increments, so it lies in `[0, 1]` and is unchanged when the path is
//! multiplied by a nonzero constant.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::increments::{filtered_increments, p_increments, Filter};
use crate::path::SampledPath;
use crate::sum::NeumaierSum;

/// Value of an IR statistic plus bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrSummary {
    /// Average of the kernel terms, in `[0, 1]`.
    pub value: f64,
    /// Number of averaged terms.
    pub terms: usize,
    /// Terms where both increments were exactly zero (the `0/0 := 1`
    /// convention was applied).
    pub zero_over_zero: usize,
}

impl IrSummary {
    /// More than half of the terms relied on the `0/0` convention, which
    /// usually means a constant or heavily quantized input.
    pub fn is_degenerate(&self) -> bool {
        2 * self.zero_over_zero > self.terms
    }
}

/// `|x + y| / (|x| + |y|)`, with `0/0 := 1`.
#[inline]
pub fn psi(x: f64, y: f64) -> f64 {
    let denom = libm::fabs(x) + libm::fabs(y);
    if denom > 0.0 {
        if denom.is_finite() {
            libm::fabs(x + y) / denom
        } else {
            // rescale to dodge inf/inf
            let m = libm::fmax(libm::fabs(x), libm::fabs(y));
            psi(x / m, y / m)
        }
    } else {
        1.0
    }
}

/// Sign-persistence indicator `1(x y >= 0)`.
#[inline]
pub fn psi0(x: f64, y: f64) -> f64 {
    // compare signs rather than the product, which may underflow to 0
    if x == 0.0 || y == 0.0 || (x > 0.0) == (y > 0.0) {
        1.0
    } else {
        0.0
    }
}

#[derive(Clone, Copy)]
enum Kernel {
    Ratio,
    SignPersistence,
}

impl Kernel {
    #[inline]
    fn eval(self, x: f64, y: f64) -> f64 {
        match self {
            Kernel::Ratio => psi(x, y),
            Kernel::SignPersistence => psi0(x, y),
        }
    }
}

/// Averages the kernel over neighbouring pairs of `incs`.
fn summarize(incs: &[f64], kernel: Kernel) -> IrSummary {
    let mut acc = NeumaierSum::new();
    let mut zero_over_zero = 0;
    for w in incs.windows(2) {
        if w[0] == 0.0 && w[1] == 0.0 {
            zero_over_zero += 1;
        }
        acc.add(kernel.eval(w[0], w[1]));
    }
    let terms = incs.len().saturating_sub(1);
    IrSummary {
        value: (acc.total() / terms as f64).clamp(0.0, 1.0),
        terms,
        zero_over_zero,
    }
}

fn require_len(path: &SampledPath, needed: usize, what: &'static str) -> Result<()> {
    if path.n() < needed {
        return Err(Error::Size {
            what,
            needed,
            got: path.n(),
        });
    }
    Ok(())
}

fn require_order(p: usize) -> Result<()> {
    if p == 0 {
        return Err(Error::Domain {
            what: "increment order p",
            value: 0.0,
            expected: "p >= 1",
        });
    }
    Ok(())
}

/// `R^{p,n}`: the average of `psi` over consecutive `p`-th order increments,
/// `n - p` terms normalized by `n - p`.
pub fn r_pn(path: &SampledPath, p: usize) -> Result<IrSummary> {
    require_order(p)?;
    require_len(path, p + 2, "grid size n for R^{p,n} (n >= p + 2)")?;
    Ok(summarize(&p_increments(path.values(), p), Kernel::Ratio))
}

/// Zero-crossing variant of [`r_pn`] using the indicator `psi0`.
pub fn r0_pn(path: &SampledPath, p: usize) -> Result<IrSummary> {
    require_order(p)?;
    require_len(path, p + 2, "grid size n for R0^{p,n} (n >= p + 2)")?;
    Ok(summarize(
        &p_increments(path.values(), p),
        Kernel::SignPersistence,
    ))
}

/// `R^{a,n}`: [`r_pn`] with the binomial increment replaced by a general
/// filter; `n - q` terms.
pub fn r_an(path: &SampledPath, a: &Filter) -> Result<IrSummary> {
    require_len(path, a.q() + 2, "grid size n for R^{a,n} (n >= q + 2)")?;
    Ok(summarize(
        &filtered_increments(path.values(), a),
        Kernel::Ratio,
    ))
}

/// The kernel terms `psi(D_k, D_{k+1})` of [`r_pn`], in order.
pub fn psi_terms(path: &SampledPath, p: usize) -> Result<Vec<f64>> {
    require_order(p)?;
    require_len(path, p + 2, "grid size n for R^{p,n} (n >= p + 2)")?;
    let incs = p_increments(path.values(), p);
    Ok(incs.windows(2).map(|w| psi(w[0], w[1])).collect())
}

/// Localized `R^{2,n}` around `t0`: the average of `psi` over second-order
/// increment pairs with index in `[floor(n t0 - n^w), floor(n t0 + n^w)]`.
///
/// The window is clipped to the valid indices `0..=n-3` and the average is
/// taken over the terms actually present, so `t0` near the boundary still
/// gives a value.
pub fn r_local(path: &SampledPath, t0: f64, w: f64) -> Result<IrSummary> {
    if !(t0 > 0.0 && t0 < 1.0) {
        return Err(Error::Domain {
            what: "t0",
            value: t0,
            expected: "0 < t0 < 1",
        });
    }
    if !(w > 0.0 && w < 1.0) {
        return Err(Error::Domain {
            what: "window exponent w",
            value: w,
            expected: "0 < w < 1",
        });
    }
    require_len(path, 4, "grid size n for local R^{2,n}")?;
    let (lo, hi) = local_window(path.n(), t0, w).ok_or(Error::Size {
        what: "local window terms",
        needed: 1,
        got: 0,
    })?;
    // second increments lo..=hi+1 feed the pairs lo..=hi
    let incs = p_increments(&path.values()[lo..=hi + 3], 2);
    Ok(summarize(&incs, Kernel::Ratio))
}

/// Clipped index window of [`r_local`], or `None` when empty.
pub fn local_window(n: usize, t0: f64, w: f64) -> Option<(usize, usize)> {
    let nf = n as f64;
    let half = libm::pow(nf, w);
    let lo = libm::floor(nf * t0 - half).max(0.0);
    let hi = libm::floor(nf * t0 + half).min(n as f64 - 3.0);
    if hi < lo || hi < 0.0 {
        return None;
    }
    Some((lo as usize, hi as usize))
}

/// Second-order increments at even indices `0, 2, 4, ...`. An odd final
/// sample is dropped so that the grid size is even.
fn even_second_increments(path: &SampledPath) -> Result<Vec<f64>> {
    require_len(path, 6, "grid size n for R~^{2,n} (n >= 6)")?;
    let n = path.n() & !1;
    let v = &path.values()[..=n];
    Ok((0..n / 2)
        .map(|k| {
            let j = 2 * k;
            v[j] - 2.0 * v[j + 1] + v[j + 2]
        })
        .collect())
}

/// `R~^{2,n}`: `psi` of second-order increments taken at disjoint even
/// indices, `n/2 - 1` terms. For independent-increment paths consecutive
/// terms share one increment only, and each increment is a symmetric
/// difference of two path increments.
pub fn r_tilde_2n(path: &SampledPath) -> Result<IrSummary> {
    Ok(summarize(&even_second_increments(path)?, Kernel::Ratio))
}

/// Zero-crossing analogue of [`r_tilde_2n`] using `psi0`.
pub fn r0_tilde_2n(path: &SampledPath) -> Result<IrSummary> {
    Ok(summarize(
        &even_second_increments(path)?,
        Kernel::SignPersistence,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::increments::make_binomial_filter;
    use alloc::vec;
    use proptest::prelude::*;

    fn path(v: Vec<f64>) -> SampledPath {
        SampledPath::new(v).unwrap()
    }

    fn alternating(n: usize) -> SampledPath {
        SampledPath::from_fn(n, |t| {
            let j = libm::round(t * n as f64) as usize;
            (j % 2) as f64
        })
        .unwrap()
    }

    #[test]
    fn psi_examples() {
        assert_eq!(psi(1.0, 1.0), 1.0);
        assert_eq!(psi(1.0, -1.0), 0.0);
        assert_eq!(psi(0.0, 0.0), 1.0);
        assert_eq!(psi(f64::MAX, f64::MAX), 1.0);
        assert_eq!(psi(f64::MAX, -f64::MAX), 0.0);
    }

    #[test]
    fn psi0_examples() {
        assert_eq!(psi0(2.0, 3.0), 1.0);
        assert_eq!(psi0(2.0, -3.0), 0.0);
        assert_eq!(psi0(0.0, -5.0), 1.0);
        assert_eq!(psi0(1e-200, -1e-200), 0.0);
    }

    #[test]
    fn r_pn_examples() {
        let inc = SampledPath::from_fn(100, |t| t * t * t + t).unwrap();
        assert_eq!(r_pn(&inc, 1).unwrap().value, 1.0);
        assert_eq!(r_pn(&inc, 1).unwrap().terms, 99);

        assert_eq!(r_pn(&alternating(50), 1).unwrap().value, 0.0);

        let c = path(vec![3.0; 21]);
        for p in 1..=4 {
            let s = r_pn(&c, p).unwrap();
            assert_eq!(s.value, 1.0);
            assert_eq!(s.terms, 20 - p);
            assert_eq!(s.zero_over_zero, s.terms);
            assert!(s.is_degenerate());
        }
    }

    #[test]
    fn r_pn_size_errors() {
        let p = path(vec![0.0, 1.0, 0.0, 1.0]);
        assert!(r_pn(&p, 1).is_ok());
        assert!(matches!(
            r_pn(&p, 2),
            Err(Error::Size {
                needed: 4,
                got: 3,
                ..
            })
        ));
        assert!(matches!(r_pn(&p, 0), Err(Error::Domain { .. })));
    }

    #[test]
    fn r_an_examples() {
        let v: Vec<f64> = (0..40)
            .map(|i| libm::sin(i as f64 * 1.7) * (1.0 + i as f64))
            .collect();
        let x = path(v.clone());
        let d1 = make_binomial_filter(1).unwrap();
        assert_eq!(r_an(&x, &d1).unwrap(), r_pn(&x, 1).unwrap());

        let sq = SampledPath::from_fn(30, |t| t * t).unwrap();
        let d2 = make_binomial_filter(2).unwrap();
        let s = r_an(&sq, &d2).unwrap();
        assert!((s.value - 1.0).abs() < 1e-15);
        assert_eq!(s.zero_over_zero, 0);

        // the order-3 filter annihilates quadratics exactly on this grid
        let n = 32;
        let d3 = make_binomial_filter(3).unwrap();
        let base = SampledPath::new((0..=n).map(|j| ((j * 7919) % 31) as f64).collect()).unwrap();
        let trended = base.map(|t, x| x + 64.0 * t * t + 8.0 * t).unwrap();
        assert_eq!(r_an(&trended, &d3).unwrap(), r_an(&base, &d3).unwrap());
    }

    #[test]
    fn r0_examples() {
        let inc = SampledPath::from_fn(64, libm::exp).unwrap();
        assert_eq!(r0_pn(&inc, 1).unwrap().value, 1.0);
        assert_eq!(r0_pn(&alternating(64), 1).unwrap().value, 0.0);
    }

    #[test]
    fn r_local_full_window_equals_r2() {
        let v: Vec<f64> = (0..=200)
            .map(|i| libm::cos(i as f64 * 0.9) + 0.01 * i as f64)
            .collect();
        let x = path(v);
        // n^0.99 > n/2 covers everything from t0 = 1/2
        let loc = r_local(&x, 0.5, 0.99).unwrap();
        let full = r_pn(&x, 2).unwrap();
        assert_eq!(loc.terms, full.terms);
        assert!((loc.value - full.value).abs() < 1e-15);
    }

    #[test]
    fn r_local_window_and_errors() {
        let c = path(vec![1.0; 101]);
        assert_eq!(r_local(&c, 0.3, 0.5).unwrap().value, 1.0);
        assert_eq!(local_window(100, 0.5, 0.5), Some((40, 60)));
        // clipped on the left
        assert_eq!(local_window(100, 0.01, 0.5), Some((0, 11)));
        assert_eq!(r_local(&c, 0.01, 0.5).unwrap().terms, 12);
        assert!(matches!(r_local(&c, 0.0, 0.5), Err(Error::Domain { .. })));
        assert!(matches!(r_local(&c, 0.5, 1.0), Err(Error::Domain { .. })));
    }

    #[test]
    fn r_tilde_examples() {
        let convex = SampledPath::from_fn(40, |t| libm::exp(3.0 * t)).unwrap();
        let s = r_tilde_2n(&convex).unwrap();
        assert_eq!(s.value, 1.0);
        assert_eq!(s.terms, 19);

        // second increments at even indices alternate +c, -c
        let n = 40;
        let mut v = vec![0.0; n + 1];
        for k in 0..n / 2 {
            let j = 2 * k;
            let c = if k % 2 == 0 { 1.0 } else { -1.0 };
            v[j + 2] = c + 2.0 * v[j + 1] - v[j];
            if j + 3 <= n {
                v[j + 3] = v[j + 2];
            }
        }
        assert_eq!(r_tilde_2n(&path(v)).unwrap().value, 0.0);

        // odd n drops the final sample
        let odd = SampledPath::from_fn(41, |t| libm::sin(9.0 * t)).unwrap();
        let even = odd.truncated(40).unwrap();
        assert_eq!(r_tilde_2n(&odd).unwrap(), r_tilde_2n(&even).unwrap());

        assert!(matches!(
            r_tilde_2n(&path(vec![0.0; 6])),
            Err(Error::Size { .. })
        ));
        let flat = r_tilde_2n(&path(vec![0.0; 7])).unwrap();
        assert_eq!((flat.value, flat.terms, flat.zero_over_zero), (1.0, 2, 2));
    }

    fn arb_path() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(
            prop_oneof![3 => -1e3f64..1e3, 1 => Just(0.0), 1 => -1.0f64..1.0],
            8..120,
        )
    }

    fn all_stats(x: &SampledPath) -> [IrSummary; 6] {
        [
            r_pn(x, 1).unwrap(),
            r_pn(x, 2).unwrap(),
            r0_pn(x, 1).unwrap(),
            r_tilde_2n(x).unwrap(),
            r0_tilde_2n(x).unwrap(),
            r_local(x, 0.5, 0.7).unwrap(),
        ]
    }

    proptest! {
        #[test]
        fn range_and_bookkeeping(v in arb_path()) {
            let x = path(v);
            for s in all_stats(&x) {
                prop_assert!((0.0..=1.0).contains(&s.value));
                prop_assert!(s.zero_over_zero <= s.terms);
            }
        }

        #[test]
        fn sign_and_power_of_two_scale_are_bitwise_invariant(v in arb_path(), e in -20i32..20) {
            let x = path(v);
            let c = libm::ldexp(1.0, e);
            let neg = x.map(|_, y| -y).unwrap();
            let scaled = x.map(|_, y| -c * y).unwrap();
            let base = all_stats(&x);
            prop_assert_eq!(base, all_stats(&neg));
            prop_assert_eq!(base, all_stats(&scaled));
        }
    }
}
