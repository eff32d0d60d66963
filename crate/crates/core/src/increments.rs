//! Finite differences and generalized variations on a sampled path.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::path::SampledPath;

/// Absolute tolerance for the vanishing-moment conditions of a [`Filter`].
pub const MOMENT_TOL: f64 = 1e-12;

/// Coefficients `a_0..a_q` with `p` vanishing moments:
/// `sum_l l^i a_l = 0` for `i < p` and `sum_l l^p a_l != 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Filter {
    coeffs: Vec<f64>,
    order: usize,
}

impl Filter {
    /// Validates `coeffs` as a filter of vanishing-moment order `order`.
    pub fn new(coeffs: Vec<f64>, order: usize) -> Result<Self> {
        if coeffs.len() < 2 {
            return Err(Error::InvalidFilter {
                reason: "need at least two coefficients",
            });
        }
        if order == 0 {
            return Err(Error::InvalidFilter {
                reason: "order must be at least 1",
            });
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidFilter {
                reason: "non-finite coefficient",
            });
        }
        for i in 0..order {
            if libm::fabs(moment(&coeffs, i)) > MOMENT_TOL {
                return Err(Error::InvalidFilter {
                    reason: "a moment below the stated order does not vanish",
                });
            }
        }
        if libm::fabs(moment(&coeffs, order)) <= MOMENT_TOL {
            return Err(Error::InvalidFilter {
                reason: "moment of the stated order vanishes; order is higher",
            });
        }
        Ok(Self { coeffs, order })
    }

    /// Validates `coeffs` and infers the vanishing-moment order.
    pub fn detect(coeffs: Vec<f64>) -> Result<Self> {
        let q = coeffs.len().saturating_sub(1);
        let order = (0..=q)
            .find(|&i| libm::fabs(moment(&coeffs, i)) > MOMENT_TOL)
            .ok_or(Error::InvalidFilter {
                reason: "all moments up to q vanish",
            })?;
        Self::new(coeffs, order)
    }

    #[inline]
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// `q`: the filter spans `q + 1` consecutive samples.
    #[inline]
    pub fn q(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Vanishing-moment order `p`.
    #[inline]
    pub fn order(&self) -> usize {
        self.order
    }

    /// Applies the filter to a window starting at `values[0]`.
    #[inline]
    pub(crate) fn apply(&self, values: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (a, x) in self.coeffs.iter().zip(values) {
            acc += a * x;
        }
        acc
    }
}

fn moment(coeffs: &[f64], i: usize) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(l, a)| libm::pow(l as f64, i as f64) * a)
        .sum()
}

/// `(-1)^(p-l) C(p, l)` for `l = 0..=p`, exact in f64 for `p <= 60`.
fn binomial_coeffs(p: usize) -> Vec<f64> {
    let mut c = Vec::with_capacity(p + 1);
    let mut binom: u128 = 1;
    for l in 0..=p {
        let sign = if (p - l).is_multiple_of(2) { 1.0 } else { -1.0 };
        c.push(sign * binom as f64);
        binom = binom * (p - l) as u128 / (l + 1) as u128;
    }
    c
}

/// The binomial filter `a_l = (-1)^(p-l) C(p, l)`, which has order exactly `p`.
pub fn make_binomial_filter(p: usize) -> Result<Filter> {
    if p == 0 {
        return Err(Error::Domain {
            what: "filter order p",
            value: 0.0,
            expected: "p >= 1",
        });
    }
    Ok(Filter {
        coeffs: binomial_coeffs(p),
        order: p,
    })
}

/// The `p`-th order increment `sum_i (-1)^(p-i) C(p,i) f((j+i)/n)`.
pub fn p_increment(path: &SampledPath, p: usize, j: usize) -> Result<f64> {
    if p == 0 {
        return Err(Error::Domain {
            what: "increment order p",
            value: 0.0,
            expected: "p >= 1",
        });
    }
    let n = path.n();
    if p >= n {
        return Err(Error::Size {
            what: "grid size n for p-increment (n > p)",
            needed: p + 1,
            got: n,
        });
    }
    if j > n - p {
        return Err(Error::Index {
            index: j,
            max: n - p,
        });
    }
    let coeffs = binomial_coeffs(p);
    let window = &path.values()[j..=j + p];
    let mut acc = 0.0;
    for (a, x) in coeffs.iter().zip(window) {
        acc += a * x;
    }
    Ok(acc)
}

/// The generalized variation `sum_l a_l f((j+l)/n)`.
pub fn filtered_increment(path: &SampledPath, a: &Filter, j: usize) -> Result<f64> {
    let n = path.n();
    let q = a.q();
    if q > n || j > n - q {
        return Err(Error::Index {
            index: j,
            max: n.saturating_sub(q),
        });
    }
    Ok(a.apply(&path.values()[j..=j + q]))
}

/// All filtered increments `j = 0..=n-q` in one pass.
pub(crate) fn filtered_increments(values: &[f64], a: &Filter) -> Vec<f64> {
    values.windows(a.q() + 1).map(|w| a.apply(w)).collect()
}

/// All `p`-th order increments in one pass.
pub(crate) fn p_increments(values: &[f64], p: usize) -> Vec<f64> {
    match p {
        1 => values.windows(2).map(|w| w[1] - w[0]).collect(),
        2 => values
            .windows(3)
            .map(|w| w[0] - 2.0 * w[1] + w[2])
            .collect(),
        _ => {
            let f = Filter {
                coeffs: binomial_coeffs(p),
                order: p,
            };
            filtered_increments(values, &f)
        }
    }
}
