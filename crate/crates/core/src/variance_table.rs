use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::interp::Pchip;

/// One Monte Carlo estimate of `Sigma_p(H)`, the asymptotic variance of
/// `sqrt(n) R^{p,n}` for fBm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceRow {
    pub h: f64,
    pub p: usize,
    pub sigma: f64,
    pub mc_stderr: f64,
    pub reps: usize,
    pub path_len: usize,
    pub seed: u64,
}

/// Tabulated `Sigma_1` / `Sigma_2` on an `H` grid, interpolated by monotone
/// cubics. Extrapolation beyond the grid is refused.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceTable {
    rows: Vec<VarianceRow>,
    /// Lag truncation used by the lag-sum cross-check when the table was built.
    pub lag_truncation: usize,
    sigma1: Option<Pchip>,
    sigma2: Option<Pchip>,
}

impl VarianceTable {
    pub fn new(mut rows: Vec<VarianceRow>, lag_truncation: usize) -> Result<Self> {
        for r in &rows {
            if !(r.sigma >= 0.0 && r.sigma.is_finite()) {
                return Err(Error::Table {
                    reason: "variance entries must be finite and nonnegative",
                });
            }
            if !(r.mc_stderr >= 0.0 && r.mc_stderr.is_finite()) {
                return Err(Error::Table {
                    reason: "every entry needs a finite Monte Carlo standard error",
                });
            }
            if !(r.h > 0.0 && r.h < 1.0) || !(r.p == 1 || r.p == 2) {
                return Err(Error::Table {
                    reason: "rows need 0 < H < 1 and p in {1, 2}",
                });
            }
        }
        rows.sort_by(|a, b| a.p.cmp(&b.p).then(a.h.total_cmp(&b.h)));
        let curve = |p: usize| -> Result<Option<Pchip>> {
            let (hs, sig): (Vec<f64>, Vec<f64>) = rows
                .iter()
                .filter(|r| r.p == p)
                .map(|r| (r.h, r.sigma))
                .unzip();
            match hs.len() {
                0 => Ok(None),
                1 => Err(Error::Table {
                    reason: "need at least two grid points per order",
                }),
                _ => Pchip::new(hs, sig).map(Some),
            }
        };
        let sigma1 = curve(1)?;
        let sigma2 = curve(2)?;
        if sigma1.is_none() && sigma2.is_none() {
            return Err(Error::Table {
                reason: "table has no rows",
            });
        }
        Ok(Self {
            rows,
            lag_truncation,
            sigma1,
            sigma2,
        })
    }

    pub fn rows(&self) -> &[VarianceRow] {
        &self.rows
    }

    /// The row at grid point `h` for order `p`, if tabulated.
    pub fn entry(&self, p: usize, h: f64) -> Option<&VarianceRow> {
        self.rows
            .iter()
            .find(|r| r.p == p && libm::fabs(r.h - h) < 1e-9)
    }

    /// Interpolated `Sigma_p(h)`.
    pub fn sigma_at(&self, p: usize, h: f64) -> Result<f64> {
        let curve = match p {
            1 => self.sigma1.as_ref(),
            2 => self.sigma2.as_ref(),
            _ => None,
        }
        .ok_or(Error::Interpolation {
            at: h,
            low: f64::NAN,
            high: f64::NAN,
        })?;
        curve.eval(h).map(|s| s.max(0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn row(h: f64, p: usize, sigma: f64) -> VarianceRow {
        VarianceRow {
            h,
            p,
            sigma,
            mc_stderr: 0.01,
            reps: 100,
            path_len: 1024,
            seed: 7,
        }
    }

    #[test]
    fn interpolates_within_grid_only() {
        let t = VarianceTable::new(
            vec![
                row(0.3, 2, 0.2),
                row(0.1, 2, 0.1),
                row(0.5, 2, 0.3),
                row(0.2, 1, 0.4),
                row(0.4, 1, 0.6),
            ],
            50,
        )
        .unwrap();
        assert!((t.sigma_at(2, 0.3).unwrap() - 0.2).abs() < 1e-15);
        assert!((t.sigma_at(2, 0.2).unwrap() - 0.15).abs() < 1e-12);
        assert!((t.sigma_at(1, 0.3).unwrap() - 0.5).abs() < 1e-12);
        assert!(matches!(
            t.sigma_at(2, 0.55),
            Err(Error::Interpolation { .. })
        ));
        assert!(matches!(
            t.sigma_at(1, 0.1),
            Err(Error::Interpolation { .. })
        ));
        assert!(t.sigma_at(3, 0.3).is_err());
        assert_eq!(t.entry(2, 0.5).unwrap().sigma, 0.3);
        assert_eq!(t.rows()[0].p, 1);
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(VarianceTable::new(vec![row(0.3, 2, -0.1), row(0.4, 2, 0.1)], 50).is_err());
        assert!(VarianceTable::new(vec![row(0.3, 2, 0.1)], 50).is_err());
        assert!(VarianceTable::new(vec![], 50).is_err());
        let mut bad = row(0.4, 2, 0.1);
        bad.mc_stderr = f64::NAN;
        assert!(VarianceTable::new(vec![row(0.3, 2, 0.1), bad], 50).is_err());
    }
}
