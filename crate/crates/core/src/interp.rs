//! Shape-preserving interpolation and isotonic smoothing for tabulated
//! limit functions.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Monotone piecewise-cubic Hermite interpolant (Fritsch-Carlson slopes).
/// Evaluation outside the knot range is an error.
#[derive(Debug, Clone, PartialEq)]
pub struct Pchip {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl Pchip {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() || xs.len() < 2 {
            return Err(Error::Table {
                reason: "interpolation needs at least two knots with matching values",
            });
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Table {
                reason: "interpolation knots must be strictly increasing",
            });
        }
        let m = xs.len();
        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..m - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();
        let mut slopes = alloc::vec![0.0; m];
        if m == 2 {
            slopes[0] = delta[0];
            slopes[1] = delta[0];
        } else {
            for i in 1..m - 1 {
                if delta[i - 1] * delta[i] > 0.0 {
                    let w1 = 2.0 * h[i] + h[i - 1];
                    let w2 = h[i] + 2.0 * h[i - 1];
                    slopes[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
                }
            }
            slopes[0] = end_slope(h[0], h[1], delta[0], delta[1]);
            slopes[m - 1] = end_slope(h[m - 2], h[m - 3], delta[m - 2], delta[m - 3]);
        }
        Ok(Self { xs, ys, slopes })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    pub fn knots(&self) -> (&[f64], &[f64]) {
        (&self.xs, &self.ys)
    }

    fn segment(&self, x: f64) -> Result<usize> {
        let (lo, hi) = self.domain();
        if !(x >= lo && x <= hi) {
            return Err(Error::Interpolation {
                at: x,
                low: lo,
                high: hi,
            });
        }
        let i = self.xs.partition_point(|&k| k <= x);
        Ok(i.saturating_sub(1).min(self.xs.len() - 2))
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let i = self.segment(x)?;
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        Ok(h00 * self.ys[i]
            + h10 * h * self.slopes[i]
            + h01 * self.ys[i + 1]
            + h11 * h * self.slopes[i + 1])
    }
}

// three-point end slope, limited so the interpolant stays monotone
fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if s * d0 <= 0.0 {
        0.0
    } else if d0 * d1 <= 0.0 && libm::fabs(s) > libm::fabs(3.0 * d0) {
        3.0 * d0
    } else {
        s
    }
}

/// Weighted isotonic (nondecreasing) least-squares fit by pool-adjacent-
/// violators.
pub fn isotonic_increasing(ys: &[f64], weights: &[f64]) -> Vec<f64> {
    debug_assert_eq!(ys.len(), weights.len());
    // blocks of (weighted mean, total weight, count)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(ys.len());
    for (&y, &w) in ys.iter().zip(weights) {
        blocks.push((y, w, 1));
        while blocks.len() > 1 {
            let (m2, w2, c2) = blocks[blocks.len() - 1];
            let (m1, w1, c1) = blocks[blocks.len() - 2];
            if m1 <= m2 {
                break;
            }
            blocks.truncate(blocks.len() - 2);
            let w = w1 + w2;
            blocks.push(((m1 * w1 + m2 * w2) / w, w, c1 + c2));
        }
    }
    let mut out = Vec::with_capacity(ys.len());
    for (m, _, c) in blocks {
        out.extend(core::iter::repeat_n(m, c));
    }
    out
}

/// Nonincreasing counterpart of [`isotonic_increasing`].
pub fn isotonic_decreasing(ys: &[f64], weights: &[f64]) -> Vec<f64> {
    let neg: Vec<f64> = ys.iter().map(|y| -y).collect();
    isotonic_increasing(&neg, weights)
        .into_iter()
        .map(|y| -y)
        .collect()
}

/// Root of a monotone function on `[lo, hi]` by bisection. `f` is only
/// evaluated strictly inside the bracket.
pub fn bisect(
    mut f: impl FnMut(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    increasing: bool,
) -> f64 {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let below = f(mid) < 0.0;
        if below == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn pchip_reproduces_knots_and_lines() {
        let xs = vec![0.0, 0.5, 1.5, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x - 1.0).collect();
        let p = Pchip::new(xs.clone(), ys.clone()).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            assert!((p.eval(*x).unwrap() - y).abs() < 1e-14);
        }
        assert!((p.eval(1.1).unwrap() - 1.2).abs() < 1e-14);
        assert!(matches!(p.eval(3.01), Err(Error::Interpolation { .. })));
        assert!(matches!(p.eval(-0.01), Err(Error::Interpolation { .. })));
    }

    #[test]
    fn pavas_known_case() {
        let y = [1.0, 3.0, 2.0, 4.0, 3.5, 5.0];
        let fit = isotonic_increasing(&y, &[1.0; 6]);
        assert_eq!(fit, vec![1.0, 2.5, 2.5, 3.75, 3.75, 5.0]);
        let dec = isotonic_decreasing(&[3.0, 1.0, 2.0], &[1.0, 1.0, 2.0]);
        assert_eq!(dec, vec![3.0, 5.0 / 3.0, 5.0 / 3.0]);
    }

    #[test]
    fn bisect_finds_root() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-12, true);
        assert!((r - core::f64::consts::SQRT_2).abs() < 1e-12);
        let r = bisect(|x| 1.0 - x, 0.0, 3.0, 1e-12, false);
        assert!((r - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn pchip_preserves_monotonicity(
            steps in prop::collection::vec(0.0f64..1.0, 3..12),
            probe in 0.0f64..1.0,
        ) {
            let xs: Vec<f64> = (0..steps.len()).map(|i| i as f64).collect();
            let mut acc = 0.0;
            let ys: Vec<f64> = steps.iter().map(|s| { acc += s; acc }).collect();
            let p = Pchip::new(xs, ys).unwrap();
            let top = (steps.len() - 1) as f64;
            let a = p.eval(probe * top).unwrap();
            let b = p.eval((probe * top + 0.1).min(top)).unwrap();
            prop_assert!(b >= a - 1e-12);
        }

        #[test]
        fn isotonic_output_is_monotone(ys in prop::collection::vec(-10.0f64..10.0, 1..40)) {
            let w = vec![1.0; ys.len()];
            let fit = isotonic_increasing(&ys, &w);
            prop_assert_eq!(fit.len(), ys.len());
            prop_assert!(fit.windows(2).all(|w| w[1] >= w[0] - 1e-12));
            // weighted mean is preserved
            let s0: f64 = ys.iter().sum();
            let s1: f64 = fit.iter().sum();
            prop_assert!((s0 - s1).abs() < 1e-9);
        }
    }
}
