//! Multiscale fBm: a stationary-increment Gaussian process whose spectral
//! density is a piecewise power law,
//! `f(xi) = sigma_j^2 / |xi|^(2 H_j + 1)` for `omega_j <= |xi| < omega_{j+1}`.
//!
//! Synthesis discretizes `X_t = Re sum_k c_k (e^{i t xi_k} - 1)` with complex
//! Gaussian coefficients whose variance is the exact spectral mass of each
//! frequency cell, so `E (X_t - X_s)^2 = sum_k 2 w_k (2 - 2 cos((t-s) xi_k))`.
//!
//! * Cells `[(k - 1/2) delta, (k + 1/2) delta)`, `k = 1..points`, with
//!   `delta = cutoff / points` and `cutoff = cutoff_factor * pi * n`. On the
//!   grid `t = j/n` the phases repeat with period `P = 2 points /
//!   cutoff_factor` in `k`, so the coefficients are folded modulo `P` and
//!   summed with one FFT of length `P`.
//! * Below `(DIRECT_CELLS - 1/2) delta` the phases are not folded: the band
//!   `[0, delta/2)` is split into geometrically shrinking subcells and each
//!   of the next cells into a few equal subcells, summed directly. Each
//!   subcell sits at its root-mean-square frequency under `f`, which keeps
//!   the small-lag variogram exact where the density is steep.
//! * Mass beyond the cutoff is added as independent white noise per grid
//!   point, which is what it looks like at grid resolution.
//!
//! The discrete process is periodic with period `P/n` in time, which must be
//! at least 2 (twice the sampled horizon), otherwise construction fails.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use roughir_core::{Error as CoreError, SampledPath};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::check_n;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    /// Lower frequency edge; the first band starts at 0.
    pub omega: f64,
    pub sigma: f64,
    pub h: f64,
}

impl Band {
    /// Single band over `(0, inf)` scaled so that the variogram is exactly
    /// `t^(2H)`, i.e. the spectral density of standard fBm.
    pub fn fbm(h: f64) -> Self {
        Band {
            omega: 0.0,
            sigma: fbm_sigma(h),
            h,
        }
    }
}

/// `sigma` with `sigma^2 = Gamma(2H+1) sin(pi H) / (2 pi)`.
pub fn fbm_sigma(h: f64) -> f64 {
    (libm::tgamma(2.0 * h + 1.0) * (PI * h).sin() / (2.0 * PI)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreqGrid {
    pub cutoff_factor: u32,
    pub points: usize,
}

impl Default for FreqGrid {
    fn default() -> Self {
        Self {
            cutoff_factor: 64,
            points: 1 << 20,
        }
    }
}

pub fn validate_bands(bands: &[Band]) -> Result<()> {
    let cfg = |m: String| Err(Error::Config(m));
    let (Some(first), Some(last)) = (bands.first(), bands.last()) else {
        return cfg("at least one band is required".into());
    };
    if first.omega != 0.0 {
        return cfg(format!("first band must start at 0, got {}", first.omega));
    }
    for b in bands {
        if !(b.omega.is_finite() && b.sigma.is_finite() && b.h.is_finite()) || b.sigma < 0.0 {
            return cfg(format!("invalid band {b:?}"));
        }
    }
    if bands.windows(2).any(|w| !(w[0].omega < w[1].omega)) {
        return cfg("band edges must be strictly increasing".into());
    }
    if !(first.h < 1.0) {
        return Err(CoreError::Domain {
            what: "lowest-band H",
            value: first.h,
            expected: "H_0 < 1",
        }
        .into());
    }
    if !(last.h > 0.0) {
        return Err(CoreError::Domain {
            what: "highest-band H",
            value: last.h,
            expected: "H_l > 0",
        }
        .into());
    }
    Ok(())
}

/// `int_a^b sigma^2 xi^(m-2H-1) d xi` for `0 < a < b <= inf`.
fn power_moment(sigma: f64, h: f64, m: f64, a: f64, b: f64) -> f64 {
    let s2 = sigma * sigma;
    // exponent of the antiderivative
    let e = m - 2.0 * h;
    if b.is_infinite() {
        return -s2 * a.powf(e) / e;
    }
    let l = (b / a).ln();
    if e == 0.0 {
        s2 * l
    } else {
        s2 * a.powf(e) * (e * l).exp_m1() / e
    }
}

fn band_moment(bands: &[Band], m: f64, a: f64, b: f64) -> f64 {
    let mut total = 0.0;
    for (i, band) in bands.iter().enumerate() {
        let hi = bands.get(i + 1).map_or(f64::INFINITY, |nb| nb.omega);
        let lo = band.omega.max(a);
        let up = hi.min(b);
        if lo < up {
            total += power_moment(band.sigma, band.h, m, lo, up);
        }
    }
    total
}

/// Spectral mass of `[a, b)` on the positive half-line.
pub fn spectral_mass(bands: &[Band], a: f64, b: f64) -> f64 {
    band_moment(bands, 0.0, a, b)
}

/// `(rms frequency, sqrt(2 mass))` of the subcell `[a, b)`.
fn direct_term(bands: &[Band], a: f64, b: f64) -> (f64, f64) {
    let mass = spectral_mass(bands, a, b);
    let xi = if mass > 0.0 {
        (band_moment(bands, 2.0, a, b) / mass).sqrt()
    } else {
        (a * b).sqrt()
    };
    (xi, (2.0 * mass).sqrt())
}

/// Spectral density at `xi > 0`.
pub fn density(bands: &[Band], xi: f64) -> f64 {
    let i = bands.partition_point(|b| b.omega <= xi).max(1) - 1;
    let b = bands[i];
    b.sigma * b.sigma * xi.powf(-2.0 * b.h - 1.0)
}

const LOW_SUBCELLS: usize = 64;
/// Cells `1..DIRECT_CELLS` are summed directly, each split this many ways.
const DIRECT_CELLS: usize = 16;
const DIRECT_SPLIT: usize = 4;
/// The smallest low subcell starts at this fraction of `delta / 2`.
const LOW_FLOOR: f64 = 1e-12;

pub struct MultiscaleGenerator {
    n: usize,
    period: usize,
    delta: f64,
    /// `sqrt(2 w_k)` for `k = 1..points`; index 0 unused
    amp: Vec<f64>,
    /// `(frequency, sqrt(2 w))` of the directly summed subcells
    direct: Vec<(f64, f64)>,
    tail_sd: f64,
    fft: Arc<dyn Fft<f64>>,
}

impl MultiscaleGenerator {
    pub fn new(n: usize, bands: &[Band], grid: FreqGrid) -> Result<Self> {
        check_n(n, 2)?;
        validate_bands(bands)?;
        let cf = grid.cutoff_factor as usize;
        if cf < 2 || grid.points < 2 || !(2 * grid.points).is_multiple_of(cf) {
            return Err(Error::Config(format!(
                "frequency grid needs cutoff_factor >= 2 dividing 2*points, got {} and {}",
                grid.cutoff_factor, grid.points
            )));
        }
        let period = 2 * grid.points / cf;
        if period < 2 * n {
            return Err(CoreError::Size {
                what: "frequency grid period (resolution too coarse for n)",
                needed: 2 * n,
                got: period,
            }
            .into());
        }
        let cutoff = grid.cutoff_factor as f64 * PI * n as f64;
        let delta = cutoff / grid.points as f64;
        let amp: Vec<f64> = (0..grid.points)
            .map(|k| {
                if k < DIRECT_CELLS {
                    return 0.0;
                }
                let a = (k as f64 - 0.5) * delta;
                (2.0 * spectral_mass(bands, a, a + delta)).sqrt()
            })
            .collect();
        let top = (grid.points as f64 - 0.5) * delta;
        let tail_sd = (2.0 * spectral_mass(bands, top, f64::INFINITY)).sqrt();
        let ratio = LOW_FLOOR.powf(1.0 / LOW_SUBCELLS as f64);
        let mut direct = Vec::with_capacity(LOW_SUBCELLS + DIRECT_CELLS * DIRECT_SPLIT);
        let mut b = 0.5 * delta;
        for _ in 0..LOW_SUBCELLS {
            let a = b * ratio;
            direct.push(direct_term(bands, a, b));
            b = a;
        }
        let width = delta / DIRECT_SPLIT as f64;
        for k in 1..DIRECT_CELLS.min(grid.points) {
            for i in 0..DIRECT_SPLIT {
                let a = (k as f64 - 0.5) * delta + i as f64 * width;
                direct.push(direct_term(bands, a, a + width));
            }
        }
        let fft = FftPlanner::new().plan_fft_inverse(period);
        Ok(Self {
            n,
            period,
            delta,
            amp,
            direct,
            tail_sd,
            fft,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SampledPath {
        let n = self.n;
        let mut folded = vec![Complex::new(0.0, 0.0); self.period];
        let mut offset = 0.0;
        for (k, &s) in self.amp.iter().enumerate().skip(1) {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            folded[k % self.period] += Complex::new(s * a, s * b);
            offset += s * a;
        }
        self.fft.process(&mut folded);
        let mut values: Vec<f64> = folded[..=n].iter().map(|c| c.re - offset).collect();
        for &(xi, s) in &self.direct {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            for (j, v) in values.iter_mut().enumerate() {
                let (sin, cos) = (xi * j as f64 / n as f64).sin_cos();
                *v += s * (a * (cos - 1.0) - b * sin);
            }
        }
        let e0: f64 = rng.sample(StandardNormal);
        for v in values.iter_mut() {
            let e: f64 = rng.sample(StandardNormal);
            *v += self.tail_sd * (e - e0);
        }
        values[0] = 0.0;
        SampledPath::new(values).expect("finite Gaussian path")
    }

    /// `E (X_{j+lag} - X_j)^2` of the discretized process, in grid steps.
    pub fn implied_variogram(&self, lag: usize) -> f64 {
        if lag == 0 {
            return 0.0;
        }
        let tau = lag as f64 / self.n as f64;
        let cell = |xi: f64, s: f64| s * s * (2.0 - 2.0 * (tau * xi).cos());
        let main: f64 = self
            .amp
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &s)| cell(k as f64 * self.delta, s))
            .sum();
        let direct: f64 = self.direct.iter().map(|&(xi, s)| cell(xi, s)).sum();
        main + direct + 2.0 * self.tail_sd * self.tail_sd
    }
}

pub fn sim_multiscale_fbm<R: Rng + ?Sized>(
    n: usize,
    bands: &[Band],
    rng: &mut R,
) -> Result<SampledPath> {
    Ok(MultiscaleGenerator::new(n, bands, FreqGrid::default())?.sample(rng))
}
