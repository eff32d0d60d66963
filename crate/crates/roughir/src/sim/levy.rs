//! Brownian motion and symmetric Lévy processes on the grid `j/n`.

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use roughir_core::stable::open_unit;
use roughir_core::{sample_sym_stable, Error as CoreError, SampledPath};

use super::check_n;
use crate::error::{Error, Result};

fn cumulate(n: usize, mut step: impl FnMut(usize) -> Result<f64>) -> Result<SampledPath> {
    let mut values = Vec::with_capacity(n + 1);
    let mut x = 0.0;
    values.push(0.0);
    for j in 0..n {
        x += step(j)?;
        if !x.is_finite() {
            return Err(Error::Simulation {
                step: j + 1,
                msg: format!("path value {x}"),
            });
        }
        values.push(x);
    }
    Ok(SampledPath::new(values)?)
}

fn domain(what: &'static str, value: f64, expected: &'static str) -> Error {
    CoreError::Domain {
        what,
        value,
        expected,
    }
    .into()
}

pub fn sim_brownian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<SampledPath> {
    check_n(n, 1)?;
    let sd = (n as f64).sqrt().recip();
    cumulate(n, |_| Ok(sd * rng.sample::<f64, _>(StandardNormal)))
}

/// Partial sums of iid `scale * n^(-1/alpha) * Z` where `Z` has
/// characteristic function `exp(-|theta|^alpha)`.
pub fn sim_levy_stable<R: Rng + ?Sized>(
    n: usize,
    alpha: f64,
    scale: f64,
    rng: &mut R,
) -> Result<SampledPath> {
    check_n(n, 1)?;
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(domain("alpha", alpha, "0 < alpha <= 2"));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(domain("scale", scale, "finite scale > 0"));
    }
    let step = scale * (n as f64).powf(-1.0 / alpha);
    cumulate(n, |_| Ok(step * sample_sym_stable(alpha, rng)?))
}

/// Jumps with Lévy density `c |x|^(-1-alpha)` on `eps <= |x| <= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmallJumps {
    pub alpha: f64,
    pub c: f64,
    pub eps: f64,
}

impl SmallJumps {
    /// Total jump intensity per unit time.
    pub fn rate(&self) -> f64 {
        2.0 * self.c * (self.eps.powf(-self.alpha) - 1.0) / self.alpha
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return Err(domain("small-jump alpha", self.alpha, "0 < alpha < 2"));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(domain("small-jump c", self.c, "finite c > 0"));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(domain("small-jump eps", self.eps, "0 < eps < 1"));
        }
        if !self.rate().is_finite() {
            return Err(domain(
                "small-jump eps",
                self.eps,
                "eps giving a finite jump rate",
            ));
        }
        Ok(())
    }

    fn magnitude<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let span = self.eps.powf(-self.alpha) - 1.0;
        (1.0 + open_unit(rng) * span).powf(-1.0 / self.alpha)
    }
}

/// Symmetric jump part of a compound Lévy process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpSpec {
    /// Intensity of the large jumps, which are `N(0, jump_sd^2)`.
    pub rate: f64,
    pub jump_sd: f64,
    pub small: Option<SmallJumps>,
}

impl JumpSpec {
    pub fn none() -> Self {
        Self {
            rate: 0.0,
            jump_sd: 1.0,
            small: None,
        }
    }
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive mean").sample(rng) as u64
}

/// `a_weight * B_t` plus the jump part described by `jumps`.
pub fn sim_levy_compound<R: Rng + ?Sized>(
    n: usize,
    a_weight: f64,
    jumps: &JumpSpec,
    rng: &mut R,
) -> Result<SampledPath> {
    check_n(n, 1)?;
    if !(a_weight >= 0.0 && a_weight.is_finite()) {
        return Err(domain("a_weight", a_weight, "finite a_weight >= 0"));
    }
    if !(jumps.rate >= 0.0 && jumps.rate.is_finite()) {
        return Err(domain("jump rate", jumps.rate, "finite rate >= 0"));
    }
    if !(jumps.jump_sd >= 0.0 && jumps.jump_sd.is_finite()) {
        return Err(domain("jump sd", jumps.jump_sd, "finite sd >= 0"));
    }
    if let Some(s) = &jumps.small {
        s.validate()?;
    }
    let dt = 1.0 / n as f64;
    let sd = a_weight * dt.sqrt();
    let small_mean = jumps.small.map_or(0.0, |s| s.rate() * dt);
    cumulate(n, |_| {
        let mut d = 0.0;
        if sd > 0.0 {
            d += sd * rng.sample::<f64, _>(StandardNormal);
        }
        for _ in 0..poisson(jumps.rate * dt, rng) {
            d += jumps.jump_sd * rng.sample::<f64, _>(StandardNormal);
        }
        if let Some(s) = &jumps.small {
            for _ in 0..poisson(small_mean, rng) {
                let m = s.magnitude(rng);
                d += if rng.random::<bool>() { m } else { -m };
            }
        }
        Ok(d)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn domain_checks() {
        let mut rng = seed::rng(0, seed::stream::TEST, 0);
        assert!(sim_levy_stable(10, 0.0, 1.0, &mut rng).is_err());
        assert!(sim_levy_stable(10, 2.1, 1.0, &mut rng).is_err());
        assert!(sim_levy_stable(10, 1.0, 0.0, &mut rng).is_err());
        let bad = JumpSpec {
            rate: -1.0,
            ..JumpSpec::none()
        };
        assert!(sim_levy_compound(10, 1.0, &bad, &mut rng).is_err());
        let bad = JumpSpec {
            small: Some(SmallJumps {
                alpha: 1.2,
                c: 1.0,
                eps: 1.5,
            }),
            ..JumpSpec::none()
        };
        assert!(sim_levy_compound(10, 1.0, &bad, &mut rng).is_err());
        assert!(sim_levy_compound(10, -1.0, &JumpSpec::none(), &mut rng).is_err());
    }

    #[test]
    fn zero_everything_is_constant() {
        let mut rng = seed::rng(0, seed::stream::TEST, 0);
        let p = sim_levy_compound(50, 0.0, &JumpSpec::none(), &mut rng).unwrap();
        assert!(p.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn small_jump_magnitudes_stay_in_range() {
        let s = SmallJumps {
            alpha: 1.2,
            c: 1.0,
            eps: 1e-3,
        };
        let mut rng = seed::rng(0, seed::stream::TEST, 1);
        let mut above_tenth = 0usize;
        let draws = 200_000;
        for _ in 0..draws {
            let m = s.magnitude(&mut rng);
            assert!((s.eps..=1.0).contains(&m));
            above_tenth += (m > 0.1) as usize;
        }
        // P(|x| > u) = (u^-a - 1) / (eps^-a - 1)
        let want = (0.1f64.powf(-1.2) - 1.0) / (1e-3f64.powf(-1.2) - 1.0);
        let got = above_tenth as f64 / draws as f64;
        let se = (want * (1.0 - want) / draws as f64).sqrt();
        assert!((got - want).abs() < 4.0 * se, "{got} {want}");
    }
}
