//! Scalar functions used as simulation parameters: time-varying exponents,
//! trends and diffusion coefficients.
//!
//! Text forms (used by config files and path headers):
//! `poly:c0,c1,...` for `c0 + c1 x + ...`, `pwl:x0:y0,x1:y1,...` for a
//! piecewise-linear interpolant with constant extrapolation, and
//! `sine:a,b,f` for `a + b sin(2 pi f x)`. A bare number is a constant.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::Error;

#[derive(Clone)]
pub enum Func {
    Poly(Vec<f64>),
    Linear(Vec<(f64, f64)>),
    Sine {
        offset: f64,
        amp: f64,
        freq: f64,
    },
    /// Arbitrary closure. Has no text form and prints as `custom`.
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl Func {
    pub fn constant(c: f64) -> Self {
        Func::Poly(vec![c])
    }

    /// Linear interpolation from `(0, a)` to `(1, b)`.
    pub fn ramp(a: f64, b: f64) -> Self {
        Func::Linear(vec![(0.0, a), (1.0, b)])
    }

    pub fn custom(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Func::Custom(Arc::new(f))
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Func::Poly(c) => c.iter().rev().fold(0.0, |acc, &ck| acc * x + ck),
            Func::Linear(knots) => {
                let first = knots[0];
                let last = knots[knots.len() - 1];
                if x <= first.0 {
                    return first.1;
                }
                if x >= last.0 {
                    return last.1;
                }
                let i = knots.partition_point(|k| k.0 <= x);
                let (x0, y0) = knots[i - 1];
                let (x1, y1) = knots[i];
                y0 + (y1 - y0) * (x - x0) / (x1 - x0)
            }
            Func::Sine { offset, amp, freq } => offset + amp * (2.0 * PI * freq * x).sin(),
            Func::Custom(f) => f(x),
        }
    }

    /// Exact identity `x -> 1`, used to skip work.
    pub(crate) fn is_one(&self) -> bool {
        matches!(self, Func::Poly(c) if c.as_slice() == [1.0])
    }

    pub(crate) fn is_zero(&self) -> bool {
        matches!(self, Func::Poly(c) if c.iter().all(|&v| v == 0.0))
    }
}

impl fmt::Debug for Func {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

fn join(v: impl Iterator<Item = String>, sep: &str) -> String {
    v.collect::<Vec<_>>().join(sep)
}

impl fmt::Display for Func {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Func::Poly(c) => write!(f, "poly:{}", join(c.iter().map(|v| v.to_string()), ",")),
            Func::Linear(k) => write!(
                f,
                "pwl:{}",
                join(k.iter().map(|(x, y)| format!("{x}:{y}")), ",")
            ),
            Func::Sine { offset, amp, freq } => write!(f, "sine:{offset},{amp},{freq}"),
            Func::Custom(_) => f.write_str("custom"),
        }
    }
}

fn num(s: &str, ctx: &str) -> Result<f64, Error> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{ctx}: '{s}' is not a number")))?;
    if !v.is_finite() {
        return Err(Error::Config(format!("{ctx}: '{s}' is not finite")));
    }
    Ok(v)
}

impl FromStr for Func {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let s = s.trim();
        let Some((tag, body)) = s.split_once(':') else {
            return Ok(Func::constant(num(s, "function")?));
        };
        match tag {
            "poly" => {
                let c = body
                    .split(',')
                    .map(|t| num(t, "poly coefficient"))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Func::Poly(c))
            }
            "pwl" => {
                let knots = body
                    .split(',')
                    .map(|kv| {
                        let (x, y) = kv
                            .split_once(':')
                            .ok_or_else(|| Error::Config(format!("pwl knot '{kv}' needs x:y")))?;
                        Ok((num(x, "pwl knot")?, num(y, "pwl knot")?))
                    })
                    .collect::<Result<Vec<_>, Error>>()?;
                if knots.is_empty() || knots.windows(2).any(|w| !(w[0].0 < w[1].0)) {
                    return Err(Error::Config(
                        "pwl knots must be nonempty with increasing x".into(),
                    ));
                }
                Ok(Func::Linear(knots))
            }
            "sine" => {
                let v = body
                    .split(',')
                    .map(|t| num(t, "sine parameter"))
                    .collect::<Result<Vec<_>, _>>()?;
                let [offset, amp, freq] = v[..] else {
                    return Err(Error::Config("sine needs offset,amp,freq".into()));
                };
                Ok(Func::Sine { offset, amp, freq })
            }
            _ => Err(Error::Config(format!("unknown function form '{tag}'"))),
        }
    }
}
