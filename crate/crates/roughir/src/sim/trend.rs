//! Smooth multiplicative and additive trends `Z_t = alpha(t) X_t + beta(t)`.

use roughir_core::{Error as CoreError, SampledPath};

use super::func::Func;
use crate::error::Result;

#[derive(Debug, Clone)]
pub struct Trend {
    pub alpha: Func,
    pub beta: Func,
}

/// Pointwise `alpha(j/n) X_{j/n} + beta(j/n)`. `alpha` must be positive at
/// every grid point. The result starts at `beta(0)` rather than 0.
pub fn apply_trend(path: &SampledPath, alpha: &Func, beta: &Func) -> Result<SampledPath> {
    if alpha.is_one() && beta.is_zero() {
        return Ok(path.clone());
    }
    let n = path.n();
    for j in 0..=n {
        let t = j as f64 / n as f64;
        let a = alpha.eval(t);
        if !(a > 0.0) {
            return Err(CoreError::Domain {
                what: "trend alpha(t)",
                value: a,
                expected: "alpha(t) > 0 on the grid",
            }
            .into());
        }
    }
    Ok(path.map(|t, x| alpha.eval(t) * x + beta.eval(t))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use roughir_core::r_pn;

    #[test]
    fn identity_and_positivity() {
        let p = SampledPath::new(vec![0.0, 1.0, -0.5, 2.0]).unwrap();
        assert_eq!(
            apply_trend(&p, &Func::constant(1.0), &Func::constant(0.0)).unwrap(),
            p
        );
        assert!(apply_trend(&p, &Func::ramp(1.0, -1.0), &Func::constant(0.0)).is_err());
        assert!(apply_trend(&p, &Func::constant(0.0), &Func::constant(0.0)).is_err());
    }

    #[test]
    fn linear_beta_leaves_second_order_statistic() {
        let p = SampledPath::from_fn(200, |t| (37.0 * t).sin() + (91.0 * t * t).cos()).unwrap();
        let z = apply_trend(&p, &Func::constant(1.0), &Func::Poly(vec![3.0, -2.0])).unwrap();
        let a = r_pn(&p, 2).unwrap().value;
        let b = r_pn(&z, 2).unwrap().value;
        assert!((a - b).abs() < 1e-9);
    }
}
