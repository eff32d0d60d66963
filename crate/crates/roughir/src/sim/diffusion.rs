//! Itô diffusions `dX = a(X) dB + b(X) dt` by Euler-Maruyama.

use rand::Rng;
use rand_distr::StandardNormal;
use roughir_core::{Error as CoreError, SampledPath};

use super::check_n;
use super::func::Func;
use crate::error::{Error, Result};

/// Smallest accepted Euler refinement factor.
pub const MIN_REFINE: usize = 16;

/// Euler-Maruyama on the grid `1/(n refine)`, recorded at `j/n`. Starts at
/// `x0`. Fails at the first step where a coefficient or the state is not
/// finite.
pub fn sim_diffusion<R: Rng + ?Sized>(
    n: usize,
    a: &Func,
    b: &Func,
    x0: f64,
    refine: usize,
    rng: &mut R,
) -> Result<SampledPath> {
    check_n(n, 1)?;
    if refine < MIN_REFINE {
        return Err(CoreError::Size {
            what: "Euler refinement factor",
            needed: MIN_REFINE,
            got: refine,
        }
        .into());
    }
    if !x0.is_finite() {
        return Err(CoreError::Domain {
            what: "x0",
            value: x0,
            expected: "finite starting point",
        }
        .into());
    }
    let steps = n * refine;
    let dt = 1.0 / steps as f64;
    let sdt = dt.sqrt();
    let mut values = Vec::with_capacity(n + 1);
    values.push(x0);
    let mut x = x0;
    for step in 1..=steps {
        let ax = a.eval(x);
        let bx = b.eval(x);
        if !ax.is_finite() || !bx.is_finite() {
            return Err(Error::Simulation {
                step,
                msg: format!("coefficients a={ax}, b={bx} at x={x}"),
            });
        }
        let z: f64 = rng.sample(StandardNormal);
        x += ax * sdt * z + bx * dt;
        if !x.is_finite() {
            return Err(Error::Simulation {
                step,
                msg: format!("state became {x}"),
            });
        }
        if step % refine == 0 {
            values.push(x);
        }
    }
    Ok(SampledPath::new(values)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn refine_and_start_checks() {
        let mut rng = seed::rng(0, seed::stream::TEST, 0);
        let one = Func::constant(1.0);
        let zero = Func::constant(0.0);
        assert!(sim_diffusion(10, &one, &zero, 0.0, 8, &mut rng).is_err());
        assert!(sim_diffusion(10, &one, &zero, f64::NAN, 16, &mut rng).is_err());
        let p = sim_diffusion(10, &one, &zero, 2.5, 16, &mut rng).unwrap();
        assert_eq!(p.values()[0], 2.5);
        assert_eq!(p.n(), 10);
    }

    #[test]
    fn non_finite_coefficient_reports_step() {
        let mut rng = seed::rng(0, seed::stream::TEST, 0);
        let a = Func::custom(|x| if x > 0.0 { f64::NAN } else { 1.0 });
        let zero = Func::constant(0.0);
        match sim_diffusion(100, &a, &zero, 0.0, 16, &mut rng) {
            Err(Error::Simulation { step, .. }) => assert!(step >= 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn deterministic_drift() {
        // a = 0, b = 1: x0 + t exactly up to rounding
        let mut rng = seed::rng(0, seed::stream::TEST, 0);
        let p = sim_diffusion(
            8,
            &Func::constant(0.0),
            &Func::constant(1.0),
            0.0,
            16,
            &mut rng,
        )
        .unwrap();
        for (j, v) in p.values().iter().enumerate() {
            assert!((v - j as f64 / 8.0).abs() < 1e-12);
        }
    }
}
