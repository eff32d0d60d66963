//! Monte Carlo construction of the limit-variance tables.
//!
//! `Sigma_p(H)` is estimated as `n var(R^{p,n})` over simulated fBm paths,
//! with a lag-sum of empirical term covariances as an independent route.
//! `Lambda~(alpha)` and `sigma~^2(alpha)` come from long chains of iid
//! symmetric stable draws with common random numbers across the alpha grid.

use rayon::prelude::*;
use roughir_core::stable::psi_chain_moments;
use roughir_core::stats::psi_terms;
use roughir_core::variance_table::VarianceRow;
use roughir_core::{r_pn, Error as CoreError, LambdaTildeTable, VarianceTable};

use crate::error::Result;
use crate::seed::{self, stream};
use crate::sim::FbmGenerator;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
}

pub const MIN_SIGMA_REPS: usize = 100;
pub const MIN_STABLE_REPS: usize = 10_000;
pub const DEFAULT_LAG_TRUNCATION: usize = 50;
pub const DEFAULT_GAUSSIAN_REPS: usize = 2000;
pub const DEFAULT_PATH_LEN: usize = 4096;
pub const DEFAULT_STABLE_REPS: usize = 1 << 20;
/// Replications used when a missing table is built on the fly.
pub const QUICK_GAUSSIAN_REPS: usize = 500;
pub const QUICK_STABLE_REPS: usize = 1 << 17;
const STABLE_BATCHES: usize = 32;

fn check_sigma_args(p: usize, h: f64, reps: usize) -> Result<()> {
    if !(p == 1 || p == 2) {
        return Err(CoreError::Domain {
            what: "order p",
            value: p as f64,
            expected: "p in {1, 2}",
        }
        .into());
    }
    if !(h > 0.0 && h < 1.0) {
        return Err(CoreError::Domain {
            what: "H",
            value: h,
            expected: "0 < H < 1",
        }
        .into());
    }
    if p == 1 && h >= 0.75 {
        return Err(CoreError::Domain {
            what: "H for p = 1",
            value: h,
            expected: "0 < H < 3/4 (the p = 1 variance series diverges above)",
        }
        .into());
    }
    if reps < MIN_SIGMA_REPS {
        return Err(CoreError::Size {
            what: "Monte Carlo replications",
            needed: MIN_SIGMA_REPS,
            got: reps,
        }
        .into());
    }
    Ok(())
}

/// `reps` fBm paths, two per circulant draw, mapped through `f` in order.
fn fbm_paths<T: Send>(
    h: f64,
    path_len: usize,
    reps: usize,
    root: u64,
    stream_id: u64,
    f: impl Fn(&roughir_core::SampledPath) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    let gen = FbmGenerator::new(path_len, h)?;
    let pairs: Vec<Result<(T, Option<T>)>> = (0..reps.div_ceil(2))
        .into_par_iter()
        .map(|i| {
            let (a, b) = gen.sample_pair(&mut seed::rng(root, stream_id, i as u64));
            let second = if 2 * i + 1 < reps { Some(f(&b)?) } else { None };
            Ok((f(&a)?, second))
        })
        .collect();
    let mut out = Vec::with_capacity(reps);
    for r in pairs {
        let (a, b) = r?;
        out.push(a);
        out.extend(b);
    }
    Ok(out)
}

/// Sample variance and the standard error of that variance (from the
/// fourth central moment).
pub fn variance_with_stderr(xs: &[f64]) -> McEstimate {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    let (mut s2, mut s4) = (0.0, 0.0);
    for &x in xs {
        let d = (x - mean) * (x - mean);
        s2 += d;
        s4 += d * d;
    }
    let var = s2 / (m - 1.0);
    let m2 = s2 / m;
    let m4 = s4 / m;
    McEstimate {
        estimate: var,
        stderr: ((m4 - m2 * m2).max(0.0) / m).sqrt(),
    }
}

pub fn mean_with_stderr(xs: &[f64]) -> McEstimate {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1.0);
    McEstimate {
        estimate: mean,
        stderr: (var / m).sqrt(),
    }
}

/// `n var(R^{p,n})` over `reps` fBm paths of length `path_len`.
pub fn sigma_p_mc(p: usize, h: f64, reps: usize, path_len: usize, seed: u64) -> Result<McEstimate> {
    check_sigma_args(p, h, reps)?;
    let r = fbm_paths(h, path_len, reps, seed, stream::SIGMA_MC, |x| {
        Ok(r_pn(x, p)?.value)
    })?;
    let v = variance_with_stderr(&r);
    let n = path_len as f64;
    Ok(McEstimate {
        estimate: n * v.estimate,
        stderr: n * v.stderr,
    })
}

/// `gamma(0) + 2 sum_{j=1}^{lags} gamma(j)` of the psi-term sequence, with
/// autocovariances pooled over `reps` independent paths. The standard error
/// is the spread of the per-path lag sums.
pub fn sigma_lag_sum(
    p: usize,
    h: f64,
    reps: usize,
    path_len: usize,
    lags: usize,
    seed: u64,
) -> Result<McEstimate> {
    check_sigma_args(p, h, reps)?;
    let terms = fbm_paths(h, path_len, reps, seed, stream::SIGMA_LAG_SUM, |x| {
        Ok(psi_terms(x, p)?)
    })?;
    let count: usize = terms.iter().map(Vec::len).sum();
    let mean = terms.iter().flatten().sum::<f64>() / count as f64;
    let per_path: Vec<f64> = terms
        .par_iter()
        .map(|t| {
            let len = t.len();
            let mut s = 0.0;
            for j in 0..=lags.min(len - 1) {
                let g = (0..len - j)
                    .map(|k| (t[k] - mean) * (t[k + j] - mean))
                    .sum::<f64>()
                    / (len - j) as f64;
                s += if j == 0 { g } else { 2.0 * g };
            }
            s
        })
        .collect();
    Ok(mean_with_stderr(&per_path))
}

/// `(p, H)` grid of the default Gaussian table: `p = 2` on 0.05..0.95 and
/// `p = 1` on 0.05..0.70.
pub fn default_gaussian_grid() -> Vec<(usize, f64)> {
    let hs = |hi: usize| (1..=hi).map(|i| i as f64 / 20.0).collect::<Vec<_>>();
    let mut g: Vec<(usize, f64)> = hs(14).into_iter().map(|h| (1, h)).collect();
    g.extend(hs(19).into_iter().map(|h| (2, h)));
    g
}

pub fn default_stable_grid() -> Vec<f64> {
    (1..=40).map(|i| i as f64 / 20.0).collect()
}

/// One table row per grid point. Row `i` is seeded with
/// `derive(seed, SIGMA_MC, i)`, which is stored in the row so that
/// `sigma_p_mc(p, h, reps, path_len, row.seed)` reproduces it.
pub fn build_variance_table(
    grid: &[(usize, f64)],
    reps: usize,
    path_len: usize,
    seed: u64,
) -> Result<VarianceTable> {
    let mut rows = Vec::with_capacity(grid.len());
    for (i, &(p, h)) in grid.iter().enumerate() {
        let row_seed = seed::derive(seed, stream::SIGMA_MC, i as u64);
        let e = sigma_p_mc(p, h, reps, path_len, row_seed)?;
        rows.push(VarianceRow {
            h,
            p,
            sigma: e.estimate.max(0.0),
            mc_stderr: e.stderr,
            reps,
            path_len,
            seed: row_seed,
        });
    }
    Ok(VarianceTable::new(rows, DEFAULT_LAG_TRUNCATION)?)
}

/// Per-alpha `(Lambda~, sigma~^2)` estimates from `reps` chain terms split
/// into batches; batch `b` is driven by `rng(seed, STABLE_TABLE, b)` and
/// shares its draws across all alphas.
pub fn stable_moments(
    alphas: &[f64],
    reps: usize,
    seed: u64,
) -> Result<Vec<(McEstimate, McEstimate)>> {
    if reps < MIN_STABLE_REPS {
        return Err(CoreError::Size {
            what: "stable chain terms",
            needed: MIN_STABLE_REPS,
            got: reps,
        }
        .into());
    }
    let batches: Vec<_> = (0..STABLE_BATCHES)
        .into_par_iter()
        .map(|b| {
            let terms = reps / STABLE_BATCHES + usize::from(b < reps % STABLE_BATCHES);
            let mut rng = seed::rng(seed, stream::STABLE_TABLE, b as u64);
            psi_chain_moments(alphas, terms, &mut rng)
        })
        .collect::<std::result::Result<_, _>>()?;
    Ok((0..alphas.len())
        .map(|i| {
            let lam: Vec<f64> = batches.iter().map(|m: &Vec<_>| m[i].mean).collect();
            let sig: Vec<f64> = batches.iter().map(|m| m[i].sigma_sq()).collect();
            (mean_with_stderr(&lam), mean_with_stderr(&sig))
        })
        .collect())
}

pub fn lambda_tilde(alpha: f64, reps: usize, seed: u64) -> Result<McEstimate> {
    Ok(stable_moments(&[alpha], reps, seed)?[0].0)
}

/// `sigma~^2` estimate; negative estimates are reported as is and callers
/// clamp at 0.
pub fn sigma_tilde_sq(alpha: f64, reps: usize, seed: u64) -> Result<McEstimate> {
    Ok(stable_moments(&[alpha], reps, seed)?[0].1)
}

pub fn build_stable_table(alphas: &[f64], reps: usize, seed: u64) -> Result<LambdaTildeTable> {
    let est = stable_moments(alphas, reps, seed)?;
    let raw: Vec<(f64, f64, f64, f64, f64)> = alphas
        .iter()
        .zip(&est)
        .map(|(&a, (l, s))| (a, l.estimate, l.stderr, s.estimate.max(0.0), s.stderr))
        .collect();
    Ok(LambdaTildeTable::from_estimates(&raw, reps, seed)?)
}
