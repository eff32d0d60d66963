//! Seeded path simulators.
//!
//! Each simulator returns a [`SampledPath`] on the grid `j/n`, `j = 0..=n`,
//! starting at 0 (the diffusion starts at `x0`; a trend may shift the start).
//! A [`SimSpec`] bundles the process family, grid size, seed and parameters;
//! [`simulate`] is a pure function of it.

mod dense;
pub mod diffusion;
pub mod fbm;
pub mod func;
pub mod levy;
pub mod mbm;
pub mod multiscale;
pub mod trend;

use std::collections::BTreeMap;
use std::fmt;

use roughir_core::{Error as CoreError, SampledPath};

use crate::error::{Error, Result};
use crate::seed;

pub use dense::DenseGaussian;
pub use diffusion::sim_diffusion;
pub use fbm::{sim_fbm, FbmGenerator};
pub use func::Func;
pub use levy::{sim_brownian, sim_levy_compound, sim_levy_stable, JumpSpec, SmallJumps};
pub use mbm::{sim_mbm, MbmGenerator, MBM_MAX_N};
pub use multiscale::{sim_multiscale_fbm, Band, FreqGrid, MultiscaleGenerator};
pub use trend::{apply_trend, Trend};

pub(crate) fn check_hurst(h: f64) -> Result<()> {
    if h > 0.0 && h < 1.0 {
        Ok(())
    } else {
        Err(CoreError::Domain {
            what: "H",
            value: h,
            expected: "0 < H < 1",
        }
        .into())
    }
}

pub(crate) fn check_n(n: usize, min: usize) -> Result<()> {
    if n >= min {
        Ok(())
    } else {
        Err(CoreError::Size {
            what: "grid size n",
            needed: min,
            got: n,
        }
        .into())
    }
}

#[derive(Debug, Clone)]
pub enum Process {
    Brownian,
    Fbm {
        h: f64,
    },
    Mbm {
        h: Func,
    },
    MultiscaleFbm {
        bands: Vec<Band>,
        grid: FreqGrid,
    },
    Diffusion {
        a: Func,
        b: Func,
        x0: f64,
        refine: usize,
    },
    LevyStable {
        alpha: f64,
        scale: f64,
    },
    LevyCompound {
        a_weight: f64,
        jumps: JumpSpec,
    },
}

impl Process {
    pub fn kind(&self) -> &'static str {
        match self {
            Process::Brownian => "brownian",
            Process::Fbm { .. } => "fbm",
            Process::Mbm { .. } => "mbm",
            Process::MultiscaleFbm { .. } => "multiscale_fbm",
            Process::Diffusion { .. } => "diffusion",
            Process::LevyStable { .. } => "levy_stable",
            Process::LevyCompound { .. } => "levy_compound",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimSpec {
    pub process: Process,
    pub n: usize,
    pub seed: u64,
    pub trend: Option<Trend>,
}

pub const DEFAULT_REFINE: usize = 64;

impl SimSpec {
    pub fn new(process: Process, n: usize, seed: u64) -> Self {
        Self {
            process,
            n,
            seed,
            trend: None,
        }
    }

    pub fn with_trend(mut self, trend: Trend) -> Self {
        self.trend = Some(trend);
        self
    }

    /// Kind-specific parameters as text key/value pairs, the inverse of
    /// [`SimSpec::from_params`] (apart from `kind`, `n` and `seed`).
    pub fn params(&self) -> Vec<(String, String)> {
        let mut out: Vec<(&str, String)> = Vec::new();
        match &self.process {
            Process::Brownian => {}
            Process::Fbm { h } => out.push(("h", h.to_string())),
            Process::Mbm { h } => out.push(("hfunc", h.to_string())),
            Process::MultiscaleFbm { bands, grid } => {
                let b: Vec<String> = bands
                    .iter()
                    .map(|b| format!("{}:{}:{}", b.omega, b.sigma, b.h))
                    .collect();
                out.push(("bands", b.join(";")));
                out.push(("cutoff_factor", grid.cutoff_factor.to_string()));
                out.push(("grid_points", grid.points.to_string()));
            }
            Process::Diffusion { a, b, x0, refine } => {
                out.push(("a", a.to_string()));
                out.push(("b", b.to_string()));
                out.push(("x0", x0.to_string()));
                out.push(("refine", refine.to_string()));
            }
            Process::LevyStable { alpha, scale } => {
                out.push(("alpha", alpha.to_string()));
                out.push(("scale", scale.to_string()));
            }
            Process::LevyCompound { a_weight, jumps } => {
                out.push(("a_weight", a_weight.to_string()));
                out.push(("jump_rate", jumps.rate.to_string()));
                out.push(("jump_sd", jumps.jump_sd.to_string()));
                if let Some(s) = &jumps.small {
                    out.push(("small_alpha", s.alpha.to_string()));
                    out.push(("small_c", s.c.to_string()));
                    out.push(("small_eps", s.eps.to_string()));
                }
            }
        }
        if let Some(t) = &self.trend {
            out.push(("trend_alpha", t.alpha.to_string()));
            out.push(("trend_beta", t.beta.to_string()));
        }
        out.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    /// Builds a spec from flat key/value pairs: `kind`, `n`, `seed` plus the
    /// keys listed by [`SimSpec::params`]. Unknown keys are rejected.
    pub fn from_params(map: &BTreeMap<String, String>) -> Result<Self> {
        let mut used = vec!["kind", "n", "seed"];
        let get = |k: &str| map.get(k).map(String::as_str);
        let req = |k: &str| get(k).ok_or_else(|| Error::Config(format!("missing key '{k}'")));
        let kind = req("kind")?;
        let n: usize = parse(req("n")?, "n")?;
        let seed: u64 = parse(req("seed")?, "seed")?;
        let mut take = |k: &'static str| {
            used.push(k);
            map.get(k).map(String::as_str)
        };
        let process = match kind {
            "brownian" => Process::Brownian,
            "fbm" => Process::Fbm {
                h: parse(take("h").ok_or_else(|| missing("h"))?, "h")?,
            },
            "mbm" => Process::Mbm {
                h: take("hfunc").ok_or_else(|| missing("hfunc"))?.parse()?,
            },
            "multiscale_fbm" => {
                let bands = parse_bands(take("bands").ok_or_else(|| missing("bands"))?)?;
                let mut grid = FreqGrid::default();
                if let Some(v) = take("cutoff_factor") {
                    grid.cutoff_factor = parse(v, "cutoff_factor")?;
                }
                if let Some(v) = take("grid_points") {
                    grid.points = parse(v, "grid_points")?;
                }
                Process::MultiscaleFbm { bands, grid }
            }
            "diffusion" => Process::Diffusion {
                a: take("a").unwrap_or("1").parse()?,
                b: take("b").unwrap_or("0").parse()?,
                x0: take("x0")
                    .map(|v| parse(v, "x0"))
                    .transpose()?
                    .unwrap_or(0.0),
                refine: take("refine")
                    .map(|v| parse(v, "refine"))
                    .transpose()?
                    .unwrap_or(DEFAULT_REFINE),
            },
            "levy_stable" => Process::LevyStable {
                alpha: parse(take("alpha").ok_or_else(|| missing("alpha"))?, "alpha")?,
                scale: take("scale")
                    .map(|v| parse(v, "scale"))
                    .transpose()?
                    .unwrap_or(1.0),
            },
            "levy_compound" => {
                let a_weight = take("a_weight")
                    .map(|v| parse(v, "a_weight"))
                    .transpose()?
                    .unwrap_or(0.0);
                let rate = take("jump_rate")
                    .map(|v| parse(v, "jump_rate"))
                    .transpose()?
                    .unwrap_or(0.0);
                let jump_sd = take("jump_sd")
                    .map(|v| parse(v, "jump_sd"))
                    .transpose()?
                    .unwrap_or(1.0);
                let small = match take("small_alpha") {
                    None => None,
                    Some(a) => Some(SmallJumps {
                        alpha: parse(a, "small_alpha")?,
                        c: take("small_c")
                            .map(|v| parse(v, "small_c"))
                            .transpose()?
                            .unwrap_or(1.0),
                        eps: parse(
                            take("small_eps").ok_or_else(|| missing("small_eps"))?,
                            "small_eps",
                        )?,
                    }),
                };
                Process::LevyCompound {
                    a_weight,
                    jumps: JumpSpec {
                        rate,
                        jump_sd,
                        small,
                    },
                }
            }
            other => return Err(Error::Config(format!("unknown process kind '{other}'"))),
        };
        let trend = match (take("trend_alpha"), take("trend_beta")) {
            (None, None) => None,
            (a, b) => Some(Trend {
                alpha: a.unwrap_or("1").parse()?,
                beta: b.unwrap_or("0").parse()?,
            }),
        };
        if let Some(k) = map.keys().find(|k| !used.contains(&k.as_str())) {
            return Err(Error::Config(format!(
                "key '{k}' does not apply to kind '{kind}'"
            )));
        }
        Ok(Self {
            process,
            n,
            seed,
            trend,
        })
    }
}

impl fmt::Display for SimSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} n={} seed={}", self.process.kind(), self.n, self.seed)?;
        for (k, v) in self.params() {
            write!(f, " {k}={v}")?;
        }
        Ok(())
    }
}

fn missing(k: &str) -> Error {
    Error::Config(format!("missing key '{k}'"))
}

fn parse<T: std::str::FromStr>(s: &str, key: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse '{s}'")))
}

/// `omega:sigma:h` triples separated by `;`.
pub fn parse_bands(s: &str) -> Result<Vec<Band>> {
    s.split(';')
        .map(|b| {
            let v: Vec<&str> = b.split(':').collect();
            let [w, sg, h] = v[..] else {
                return Err(Error::Config(format!("band '{b}' needs omega:sigma:h")));
            };
            Ok(Band {
                omega: parse(w, "band omega")?,
                sigma: parse(sg, "band sigma")?,
                h: parse(h, "band h")?,
            })
        })
        .collect()
}

/// Simulates one path. The generator is seeded from `spec.seed` alone.
pub fn simulate(spec: &SimSpec) -> Result<SampledPath> {
    let mut rng = seed::rng(spec.seed, seed::stream::SIMULATE, 0);
    let n = spec.n;
    let path = match &spec.process {
        Process::Brownian => sim_brownian(n, &mut rng)?,
        Process::Fbm { h } => sim_fbm(n, *h, &mut rng)?,
        Process::Mbm { h } => sim_mbm(n, h, &mut rng)?,
        Process::MultiscaleFbm { bands, grid } => {
            MultiscaleGenerator::new(n, bands, *grid)?.sample(&mut rng)
        }
        Process::Diffusion { a, b, x0, refine } => sim_diffusion(n, a, b, *x0, *refine, &mut rng)?,
        Process::LevyStable { alpha, scale } => sim_levy_stable(n, *alpha, *scale, &mut rng)?,
        Process::LevyCompound { a_weight, jumps } => {
            sim_levy_compound(n, *a_weight, jumps, &mut rng)?
        }
    };
    match &spec.trend {
        Some(t) => apply_trend(&path, &t.alpha, &t.beta),
        None => Ok(path),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kv(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    #[test]
    fn params_round_trip() {
        let specs = [
            "kind=fbm n=64 seed=1 h=0.7",
            "kind=mbm n=64 seed=2 hfunc=pwl:0:0.3,1:0.7",
            "kind=multiscale_fbm n=64 seed=3 bands=0:1:0.8;100:0.5:0.3",
            "kind=diffusion n=64 seed=4 a=poly:1,0,1 b=poly:0,-1 x0=0.5 refine=16",
            "kind=levy_stable n=64 seed=5 alpha=1.5 scale=2",
            "kind=levy_compound n=64 seed=6 a_weight=0 jump_rate=3 jump_sd=1 small_alpha=1.2 small_c=1 small_eps=0.001",
            "kind=brownian n=64 seed=7 trend_alpha=sine:2,1,1 trend_beta=poly:0,0,1",
        ];
        for s in specs {
            let map: BTreeMap<String, String> = s
                .split(' ')
                .map(|t| {
                    let (k, v) = t.split_once('=').unwrap();
                    (k.to_string(), v.to_string())
                })
                .collect();
            let spec = SimSpec::from_params(&map).unwrap();
            let mut again: BTreeMap<String, String> = spec.params().into_iter().collect();
            again.insert("kind".into(), spec.process.kind().into());
            again.insert("n".into(), spec.n.to_string());
            again.insert("seed".into(), spec.seed.to_string());
            let spec2 = SimSpec::from_params(&again).unwrap();
            assert_eq!(spec.to_string(), spec2.to_string());
            let a = simulate(&spec).unwrap();
            let b = simulate(&spec2).unwrap();
            assert_eq!(a, b, "{s}");
        }
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(SimSpec::from_params(&kv(&[("kind", "fbm"), ("n", "10"), ("seed", "1")])).is_err());
        assert!(SimSpec::from_params(&kv(&[
            ("kind", "fbm"),
            ("n", "10"),
            ("seed", "1"),
            ("h", "0.5"),
            ("alpha", "1")
        ]))
        .is_err());
        assert!(SimSpec::from_params(&kv(&[("kind", "ou"), ("n", "10"), ("seed", "1")])).is_err());
        let bad_h = SimSpec::from_params(&kv(&[
            ("kind", "fbm"),
            ("n", "10"),
            ("seed", "1"),
            ("h", "1.2"),
        ]))
        .unwrap();
        assert!(simulate(&bad_h).is_err());
    }
}
