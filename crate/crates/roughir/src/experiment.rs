//! The verification experiments and their machine-readable reports.
//!
//! Every experiment is a pure function of its configuration (which carries
//! the root seed) and of the limit tables it reads. Replications run in
//! parallel with seeds derived from `(seed, experiment stream, group)` and
//! the replication index, so results do not depend on scheduling.
//! A failed replication is recorded with its error and left out of the
//! aggregates; it never aborts the run.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use roughir_core::gaussian::{estimate_h, invert_lambda2, lambda, lambda_p};
use roughir_core::{estimate_alpha, r0_tilde_2n, r_local, r_pn, r_tilde_2n, SampledPath};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mc::mean_with_stderr;
use crate::seed::{self, stream};
use crate::sim::{
    apply_trend, sim_diffusion, sim_levy_stable, FbmGenerator, Func, MbmGenerator, DEFAULT_REFINE,
};
use crate::tables::Tables;

pub const REPORT_SCHEMA: &str = "roughir-report-v1";

pub const NAMES: [&str; 6] = [
    "clt-fbm",
    "diffusion-rate",
    "trend-robustness",
    "levy-clt",
    "smooth-limit",
    "local-mbm",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CltFbmConfig {
    pub hs: Vec<f64>,
    pub p: usize,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub confidence: f64,
    pub se_multiplier: f64,
    /// Allowed relative deviation of `n var(R)` from the table entry.
    pub var_tolerance: f64,
    pub coverage_low: f64,
    pub coverage_high: f64,
}

impl Default for CltFbmConfig {
    fn default() -> Self {
        Self {
            hs: vec![0.3, 0.5, 0.7],
            p: 2,
            n: 4096,
            reps: 500,
            seed: 1,
            confidence: 0.95,
            se_multiplier: 3.0,
            var_tolerance: 0.2,
            coverage_low: 0.92,
            coverage_high: 0.98,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiffusionRateConfig {
    pub ns: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    pub a: String,
    pub b: String,
    pub x0: f64,
    pub refine: usize,
    pub max_slope: f64,
    pub se_multiplier: f64,
}

impl Default for DiffusionRateConfig {
    fn default() -> Self {
        Self {
            ns: vec![1 << 10, 1 << 12, 1 << 14],
            reps: 200,
            seed: 1,
            a: "poly:1,0,1".into(),
            b: "poly:0,-1".into(),
            x0: 0.0,
            refine: DEFAULT_REFINE,
            max_slope: -0.2,
            se_multiplier: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrendRobustnessConfig {
    pub h: f64,
    pub n: usize,
    pub pairs: usize,
    pub seed: u64,
    pub alpha: String,
    pub beta: String,
    pub tolerance: f64,
}

impl Default for TrendRobustnessConfig {
    fn default() -> Self {
        Self {
            h: 0.6,
            n: 1 << 13,
            pairs: 200,
            seed: 1,
            alpha: "sine:2,1,1".into(),
            beta: "poly:0,0,1".into(),
            tolerance: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LevyCltConfig {
    pub alphas: Vec<f64>,
    /// Alphas at which the zero-crossing statistic is checked against 1/2.
    pub zero_crossing_alphas: Vec<f64>,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub confidence: f64,
    pub se_multiplier: f64,
    pub var_tolerance: f64,
}

impl Default for LevyCltConfig {
    fn default() -> Self {
        Self {
            alphas: vec![0.8, 1.2, 1.8],
            zero_crossing_alphas: vec![0.8, 1.8],
            n: 1 << 13,
            reps: 500,
            seed: 1,
            confidence: 0.95,
            se_multiplier: 3.0,
            var_tolerance: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoothLimitConfig {
    pub oscillating: String,
    pub monotone: Vec<String>,
    pub ns: Vec<usize>,
    pub threshold_n: usize,
    pub threshold: f64,
    /// Allowed decrease between consecutive grid sizes.
    pub slack: f64,
}

impl Default for SmoothLimitConfig {
    fn default() -> Self {
        Self {
            oscillating: "sine:0,1,2".into(),
            monotone: vec!["poly:0,1,0,1".into(), "pwl:0:0,0.5:2,1:2.5".into()],
            ns: vec![1_000, 10_000, 100_000],
            threshold_n: 10_000,
            threshold: 0.99,
            slack: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalMbmConfig {
    pub hfunc: String,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub t0s: [f64; 2],
    pub window: f64,
    pub slope: f64,
    pub intercept: f64,
    pub tolerance: f64,
    pub min_ordered: f64,
}

impl Default for LocalMbmConfig {
    fn default() -> Self {
        Self {
            hfunc: "pwl:0:0.3,1:0.7".into(),
            n: 1 << 13,
            reps: 200,
            seed: 1,
            t0s: [0.2, 0.8],
            window: 0.8,
            slope: 0.1468,
            intercept: 0.5174,
            tolerance: 0.05,
            min_ordered: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
pub enum ExperimentConfig {
    CltFbm(CltFbmConfig),
    DiffusionRate(DiffusionRateConfig),
    TrendRobustness(TrendRobustnessConfig),
    LevyClt(LevyCltConfig),
    SmoothLimit(SmoothLimitConfig),
    LocalMbm(LocalMbmConfig),
}

/// Command-line overrides; `None` keeps the experiment default.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub h: Option<Vec<f64>>,
    pub alpha: Option<Vec<f64>>,
    pub n: Option<Vec<usize>>,
    pub reps: Option<usize>,
    pub seed: Option<u64>,
    pub confidence: Option<f64>,
}

fn single<T: Copy>(v: &[T], what: &str, exp: &str) -> Result<T> {
    match v {
        [x] => Ok(*x),
        _ => Err(Error::Config(format!("{exp} takes a single {what}"))),
    }
}

fn unused<T>(v: &Option<T>, what: &str, exp: &str) -> Result<()> {
    match v {
        Some(_) => Err(Error::Config(format!("{exp} has no {what} option"))),
        None => Ok(()),
    }
}

impl ExperimentConfig {
    pub fn default_for(name: &str) -> Result<Self> {
        Ok(match name {
            "clt-fbm" => Self::CltFbm(Default::default()),
            "diffusion-rate" => Self::DiffusionRate(Default::default()),
            "trend-robustness" => Self::TrendRobustness(Default::default()),
            "levy-clt" => Self::LevyClt(Default::default()),
            "smooth-limit" => Self::SmoothLimit(Default::default()),
            "local-mbm" => Self::LocalMbm(Default::default()),
            other => {
                return Err(Error::Config(format!(
                    "unknown experiment '{other}' (expected one of {})",
                    NAMES.join(", ")
                )))
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::CltFbm(_) => "clt-fbm",
            Self::DiffusionRate(_) => "diffusion-rate",
            Self::TrendRobustness(_) => "trend-robustness",
            Self::LevyClt(_) => "levy-clt",
            Self::SmoothLimit(_) => "smooth-limit",
            Self::LocalMbm(_) => "local-mbm",
        }
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        let exp = self.name();
        match self {
            Self::CltFbm(c) => {
                unused(&o.alpha, "alpha", exp)?;
                if let Some(h) = &o.h {
                    c.hs = h.clone();
                }
                if let Some(n) = &o.n {
                    c.n = single(n, "n", exp)?;
                }
                set(&mut c.reps, o.reps);
                set(&mut c.seed, o.seed);
                set(&mut c.confidence, o.confidence);
            }
            Self::DiffusionRate(c) => {
                unused(&o.h, "h", exp)?;
                unused(&o.alpha, "alpha", exp)?;
                unused(&o.confidence, "confidence", exp)?;
                if let Some(n) = &o.n {
                    c.ns = n.clone();
                }
                set(&mut c.reps, o.reps);
                set(&mut c.seed, o.seed);
            }
            Self::TrendRobustness(c) => {
                unused(&o.alpha, "alpha", exp)?;
                unused(&o.confidence, "confidence", exp)?;
                if let Some(h) = &o.h {
                    c.h = single(h, "h", exp)?;
                }
                if let Some(n) = &o.n {
                    c.n = single(n, "n", exp)?;
                }
                set(&mut c.pairs, o.reps);
                set(&mut c.seed, o.seed);
            }
            Self::LevyClt(c) => {
                unused(&o.h, "h", exp)?;
                if let Some(a) = &o.alpha {
                    c.alphas = a.clone();
                    c.zero_crossing_alphas.retain(|z| a.contains(z));
                }
                if let Some(n) = &o.n {
                    c.n = single(n, "n", exp)?;
                }
                set(&mut c.reps, o.reps);
                set(&mut c.seed, o.seed);
                set(&mut c.confidence, o.confidence);
            }
            Self::SmoothLimit(c) => {
                unused(&o.h, "h", exp)?;
                unused(&o.alpha, "alpha", exp)?;
                unused(&o.reps, "reps", exp)?;
                unused(&o.seed, "seed", exp)?;
                unused(&o.confidence, "confidence", exp)?;
                if let Some(n) = &o.n {
                    c.ns = n.clone();
                    if !c.ns.contains(&c.threshold_n) {
                        c.threshold_n = *c.ns.iter().max().unwrap_or(&c.threshold_n);
                    }
                }
            }
            Self::LocalMbm(c) => {
                unused(&o.alpha, "alpha", exp)?;
                unused(&o.confidence, "confidence", exp)?;
                if let Some(h) = &o.h {
                    let [a, b] = h[..] else {
                        return Err(Error::Config(
                            "local-mbm takes --h START,END for a linear H(t)".into(),
                        ));
                    };
                    c.hfunc = Func::ramp(a, b).to_string();
                }
                if let Some(n) = &o.n {
                    c.n = single(n, "n", exp)?;
                }
                set(&mut c.reps, o.reps);
                set(&mut c.seed, o.seed);
            }
        }
        Ok(())
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub group: String,
    pub rep: usize,
    pub values: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub name: String,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub stderr: Option<f64>,
}

/// One check. `rule` states the comparison in words; `bound` is the numeric
/// tolerance it used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub id: String,
    pub description: String,
    pub observed: f64,
    pub target: f64,
    pub bound: f64,
    pub rule: String,
    pub pass: bool,
}

impl Verdict {
    /// `|observed - target| <= bound`.
    fn within(
        id: &str,
        description: String,
        observed: f64,
        target: f64,
        bound: f64,
        rule: &str,
    ) -> Self {
        Self {
            id: id.into(),
            description,
            observed,
            target,
            bound,
            rule: rule.into(),
            pass: (observed - target).abs() <= bound,
        }
    }

    /// `observed <= bound` (target unused and set to the bound).
    fn at_most(id: &str, description: String, observed: f64, bound: f64) -> Self {
        Self {
            id: id.into(),
            description,
            observed,
            target: bound,
            bound,
            rule: "observed <= bound".into(),
            pass: observed <= bound,
        }
    }

    fn at_least(id: &str, description: String, observed: f64, bound: f64) -> Self {
        Self {
            id: id.into(),
            description,
            observed,
            target: bound,
            bound,
            rule: "observed >= bound".into(),
            pass: observed >= bound,
        }
    }

    fn in_range(id: &str, description: String, observed: f64, low: f64, high: f64) -> Self {
        Self {
            id: id.into(),
            description,
            observed,
            target: (low + high) / 2.0,
            bound: (high - low) / 2.0,
            rule: format!("{low} <= observed <= {high}"),
            pass: (low..=high).contains(&observed),
        }
    }

    /// Verdict that could not be evaluated; the numbers are placeholders.
    fn failed(id: &str, description: String, why: String) -> Self {
        Self {
            id: id.into(),
            description,
            observed: 0.0,
            target: 0.0,
            bound: 0.0,
            rule: why,
            pass: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema: String,
    pub experiment: String,
    pub config: ExperimentConfig,
    pub tables: Vec<String>,
    pub warnings: Vec<String>,
    pub aggregates: Vec<Aggregate>,
    pub verdicts: Vec<Verdict>,
    pub records: Vec<Record>,
    pub timings: Vec<Timing>,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        !self.verdicts.is_empty() && self.verdicts.iter().all(|v| v.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("report: {e}")))
    }

    /// Per-replication appendix: one tab-separated row per record.
    pub fn records_tsv(&self) -> String {
        let keys: BTreeSet<&str> = self
            .records
            .iter()
            .flat_map(|r| r.values.keys().map(String::as_str))
            .collect();
        let mut s = String::from("group\trep");
        for k in &keys {
            let _ = write!(s, "\t{k}");
        }
        s.push_str("\terror\n");
        for r in &self.records {
            let _ = write!(s, "{}\t{}", r.group, r.rep);
            for k in &keys {
                match r.values.get(*k) {
                    Some(v) => {
                        let _ = write!(s, "\t{v}");
                    }
                    None => s.push('\t'),
                }
            }
            let _ = writeln!(s, "\t{}", r.error.as_deref().unwrap_or(""));
        }
        s
    }

    /// Short human-readable summary, one line per verdict.
    pub fn summary(&self) -> String {
        let mut s = format!("experiment {}\n", self.experiment);
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        for v in &self.verdicts {
            let _ = writeln!(
                s,
                "[{}] {}: {} (observed {:.6}, target {:.6}, bound {:.6}; {})",
                if v.pass { "PASS" } else { "FAIL" },
                v.id,
                v.description,
                v.observed,
                v.target,
                v.bound,
                v.rule
            );
        }
        let _ = writeln!(
            s,
            "{}",
            if self.passed() {
                "all verdicts passed"
            } else {
                "some verdicts failed"
            }
        );
        s
    }
}

struct Builder {
    aggregates: Vec<Aggregate>,
    verdicts: Vec<Verdict>,
    records: Vec<Record>,
    timings: Vec<Timing>,
    warnings: Vec<String>,
    clock: Instant,
}

impl Builder {
    fn new() -> Self {
        Self {
            aggregates: Vec::new(),
            verdicts: Vec::new(),
            records: Vec::new(),
            timings: Vec::new(),
            warnings: Vec::new(),
            clock: Instant::now(),
        }
    }

    fn agg(&mut self, name: String, value: f64, stderr: Option<f64>) {
        self.aggregates.push(Aggregate {
            name,
            value,
            stderr,
        });
    }

    fn lap(&mut self, stage: impl Into<String>) {
        let now = Instant::now();
        self.timings.push(Timing {
            stage: stage.into(),
            seconds: (now - self.clock).as_secs_f64(),
        });
        self.clock = now;
    }

    fn finish(self, config: ExperimentConfig, tables: &Tables) -> ExperimentReport {
        let mut warnings = tables.warnings.clone();
        warnings.extend(self.warnings);
        ExperimentReport {
            schema: REPORT_SCHEMA.into(),
            experiment: config.name().into(),
            config,
            tables: tables.provenance.clone(),
            warnings,
            aggregates: self.aggregates,
            verdicts: self.verdicts,
            records: self.records,
            timings: self.timings,
        }
    }
}

fn rep_rng(root: u64, stream_id: u64, group: usize, rep: usize) -> seed::Rng {
    seed::rng(
        seed::derive(root, stream_id, group as u64),
        stream_id,
        rep as u64,
    )
}

/// Runs `f` for every replication in parallel and returns records in order.
fn replicate(
    group: &str,
    reps: usize,
    f: impl Fn(usize) -> Result<Vec<(&'static str, f64)>> + Sync,
) -> Vec<Record> {
    (0..reps)
        .into_par_iter()
        .map(|rep| match f(rep) {
            Ok(vals) => Record {
                group: group.into(),
                rep,
                values: vals.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
                error: None,
            },
            Err(e) => Record {
                group: group.into(),
                rep,
                values: BTreeMap::new(),
                error: Some(e.to_string()),
            },
        })
        .collect()
}

fn column(records: &[Record], key: &str) -> Vec<f64> {
    records
        .iter()
        .filter_map(|r| r.values.get(key).copied())
        .collect()
}

fn failures(records: &[Record]) -> usize {
    records.iter().filter(|r| r.error.is_some()).count()
}

fn note_failures(b: &mut Builder, group: &str, records: &[Record]) {
    let f = failures(records);
    if f > 0 {
        b.warnings.push(format!(
            "{group}: {f} of {} replications failed",
            records.len()
        ));
    }
}

fn check_reps(reps: usize, min: usize) -> Result<()> {
    if reps < min {
        return Err(Error::Config(format!(
            "need at least {min} replications, got {reps}"
        )));
    }
    Ok(())
}

/// Least-squares slope of `ys` on `xs`.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

pub fn run(config: &ExperimentConfig, tables: &mut Tables) -> Result<ExperimentReport> {
    let mut b = Builder::new();
    match config {
        ExperimentConfig::CltFbm(c) => clt_fbm(c, tables, &mut b)?,
        ExperimentConfig::DiffusionRate(c) => diffusion_rate(c, &mut b)?,
        ExperimentConfig::TrendRobustness(c) => trend_robustness(c, &mut b)?,
        ExperimentConfig::LevyClt(c) => levy_clt(c, tables, &mut b)?,
        ExperimentConfig::SmoothLimit(c) => smooth_limit(c, &mut b)?,
        ExperimentConfig::LocalMbm(c) => local_mbm(c, &mut b)?,
    }
    Ok(b.finish(config.clone(), tables))
}

fn clt_fbm(c: &CltFbmConfig, tables: &mut Tables, b: &mut Builder) -> Result<()> {
    check_reps(c.reps, 2)?;
    if !(c.p == 1 || c.p == 2) {
        return Err(Error::Config(format!("p must be 1 or 2, got {}", c.p)));
    }
    let table = tables.gaussian()?.clone();
    b.lap("tables");
    for (g, &h) in c.hs.iter().enumerate() {
        let group = format!("H={h}");
        let gen = FbmGenerator::new(c.n, h)?;
        let records = replicate(&group, c.reps, |rep| {
            let path = gen.sample(&mut rep_rng(c.seed, stream::EXP_CLT_FBM, g, rep));
            let r = r_pn(&path, c.p)?;
            let mut vals = vec![("R", r.value)];
            if c.p == 2 {
                let e = estimate_h(&path, &table, c.confidence)?;
                vals.extend([
                    ("h_hat", e.h_hat),
                    ("stderr", e.stderr),
                    ("ci_low", e.ci_low),
                    ("ci_high", e.ci_high),
                    (
                        "covered",
                        f64::from(u8::from(e.ci_low <= h && h <= e.ci_high)),
                    ),
                ]);
            }
            Ok(vals)
        });
        b.lap(format!("simulate {group}"));
        note_failures(b, &group, &records);
        let rs = column(&records, "R");
        let m = mean_with_stderr(&rs);
        let target = lambda_p(c.p, h)?;
        b.agg(format!("{group} mean R"), m.estimate, Some(m.stderr));
        b.verdicts.push(Verdict::within(
            &format!("mean-R[{group}]"),
            format!("mean R^{{{},n}} vs Lambda_{}(H)", c.p, c.p),
            m.estimate,
            target,
            c.se_multiplier * m.stderr,
            &format!("|observed - target| <= {} MC stderr", c.se_multiplier),
        ));
        let v = crate::mc::variance_with_stderr(&rs);
        let nvar = c.n as f64 * v.estimate;
        b.agg(
            format!("{group} n var R"),
            nvar,
            Some(c.n as f64 * v.stderr),
        );
        match table.sigma_at(c.p, h) {
            Ok(sigma) => b.verdicts.push(Verdict::within(
                &format!("nvar-R[{group}]"),
                format!("n var(R^{{{},n}}) / table Sigma_{}(H)", c.p, c.p),
                nvar / sigma,
                1.0,
                c.var_tolerance,
                "|observed - 1| <= relative tolerance",
            )),
            Err(e) => b.verdicts.push(Verdict::failed(
                &format!("nvar-R[{group}]"),
                "n var(R) vs table".into(),
                format!("table lookup failed: {e}"),
            )),
        }
        if c.p == 2 {
            // failed replications count as not covered
            let covered = column(&records, "covered").iter().sum::<f64>();
            let coverage = covered / records.len() as f64;
            b.agg(format!("{group} coverage"), coverage, None);
            b.verdicts.push(Verdict::in_range(
                &format!("coverage[{group}]"),
                format!("empirical coverage of the {} CI for H", c.confidence),
                coverage,
                c.coverage_low,
                c.coverage_high,
            ));
        }
        b.records.extend(records);
    }
    Ok(())
}

fn diffusion_rate(c: &DiffusionRateConfig, b: &mut Builder) -> Result<()> {
    check_reps(c.reps, 2)?;
    if c.ns.len() < 2 {
        return Err(Error::Config(
            "diffusion-rate needs at least two grid sizes".into(),
        ));
    }
    let a: Func = c.a.parse()?;
    let drift: Func = c.b.parse()?;
    let l1 = lambda_p(1, 0.5)?;
    let l2 = lambda_p(2, 0.5)?;
    let mut log_n = Vec::new();
    let mut log_dev = [Vec::new(), Vec::new()];
    let mut last = None;
    for (g, &n) in c.ns.iter().enumerate() {
        let group = format!("n={n}");
        let records = replicate(&group, c.reps, |rep| {
            let mut rng = rep_rng(c.seed, stream::EXP_DIFFUSION, g, rep);
            let path = sim_diffusion(n, &a, &drift, c.x0, c.refine, &mut rng)?;
            let r1 = r_pn(&path, 1)?.value;
            let r2 = r_pn(&path, 2)?.value;
            Ok(vec![
                ("R1", r1),
                ("R2", r2),
                ("dev1", (r1 - l1).abs()),
                ("dev2", (r2 - l2).abs()),
            ])
        });
        b.lap(format!("simulate {group}"));
        note_failures(b, &group, &records);
        let stats = ["R1", "R2", "dev1", "dev2"].map(|k| mean_with_stderr(&column(&records, k)));
        for (k, s) in ["R1", "R2", "dev1", "dev2"].iter().zip(&stats) {
            b.agg(format!("{group} mean {k}"), s.estimate, Some(s.stderr));
        }
        b.agg(
            format!("{group} |mean R1 - Lambda_1(1/2)|"),
            (stats[0].estimate - l1).abs(),
            None,
        );
        log_n.push((n as f64).ln());
        log_dev[0].push(stats[2].estimate.ln());
        log_dev[1].push(stats[3].estimate.ln());
        last = Some((group, stats));
        b.records.extend(records);
    }
    for (i, p) in [1, 2].into_iter().enumerate() {
        let slope = ls_slope(&log_n, &log_dev[i]);
        b.agg(
            format!("log-log slope of mean |R{p} - Lambda_{p}(1/2)|"),
            slope,
            None,
        );
        b.verdicts.push(Verdict::at_most(
            &format!("rate-R{p}"),
            format!("log-log slope of the mean pathwise deviation |R^{{{p},n}} - Lambda_{p}(1/2)| over n"),
            slope,
            c.max_slope,
        ));
        let decreasing = log_dev[i].windows(2).all(|w| w[1] < w[0]);
        b.verdicts.push(Verdict::at_least(
            &format!("decreasing-R{p}"),
            format!("mean deviation of R^{{{p},n}} decreases at every step in n (1 = yes)"),
            f64::from(u8::from(decreasing)),
            1.0,
        ));
    }
    let (group, stats) = last.expect("at least two sizes");
    for (i, (p, target)) in [(1, l1), (2, l2)].into_iter().enumerate() {
        b.verdicts.push(Verdict::within(
            &format!("limit-R{p}[{group}]"),
            format!("mean R^{{{p},n}} at the largest n vs Lambda_{p}(1/2)"),
            stats[i].estimate,
            target,
            c.se_multiplier * stats[i].stderr,
            &format!("|observed - target| <= {} MC stderr", c.se_multiplier),
        ));
    }
    Ok(())
}

fn trend_robustness(c: &TrendRobustnessConfig, b: &mut Builder) -> Result<()> {
    check_reps(c.pairs, 2)?;
    let alpha: Func = c.alpha.parse()?;
    let beta: Func = c.beta.parse()?;
    let gen = FbmGenerator::new(c.n, c.h)?;
    let records = replicate("pairs", c.pairs, |rep| {
        let x = gen.sample(&mut rep_rng(c.seed, stream::EXP_TREND, 0, rep));
        let z = apply_trend(&x, &alpha, &beta)?;
        let hx = invert_lambda2(r_pn(&x, 2)?.value)?;
        let hz = invert_lambda2(r_pn(&z, 2)?.value)?;
        Ok(vec![
            ("h_x", hx),
            ("h_z", hz),
            ("abs_diff", (hz - hx).abs()),
        ])
    });
    b.lap("simulate");
    note_failures(b, "pairs", &records);
    let d = mean_with_stderr(&column(&records, "abs_diff"));
    b.agg("mean |H(Z) - H(X)|".into(), d.estimate, Some(d.stderr));
    let hx = mean_with_stderr(&column(&records, "h_x"));
    b.agg("mean H(X)".into(), hx.estimate, Some(hx.stderr));
    b.verdicts.push(Verdict::at_most(
        "trend-shift",
        format!(
            "mean |H(Z) - H(X)| with Z = alpha(t) X + beta(t), alpha = {}, beta = {}",
            c.alpha, c.beta
        ),
        d.estimate,
        c.tolerance,
    ));
    b.records.extend(records);
    Ok(())
}

fn levy_clt(c: &LevyCltConfig, tables: &mut Tables, b: &mut Builder) -> Result<()> {
    check_reps(c.reps, 2)?;
    let table = tables.stable()?.clone();
    b.lap("tables");
    let l_half = lambda(0.0)?;
    let mut groups: Vec<f64> = c.alphas.clone();
    for &z in &c.zero_crossing_alphas {
        if !groups.contains(&z) {
            groups.push(z);
        }
    }
    for (g, &alpha) in groups.iter().enumerate() {
        let group = format!("alpha={alpha}");
        let records = replicate(&group, c.reps, |rep| {
            let mut rng = rep_rng(c.seed, stream::EXP_LEVY, g, rep);
            let path = sim_levy_stable(c.n, alpha, 1.0, &mut rng)?;
            let rt = r_tilde_2n(&path)?.value;
            let r0 = r0_tilde_2n(&path)?.value;
            let e = estimate_alpha(&path, &table, c.confidence)?;
            Ok(vec![
                ("R_tilde", rt),
                ("R0_tilde", r0),
                ("alpha_hat", e.alpha_hat),
                ("stderr", e.stderr),
                ("clamped", f64::from(u8::from(e.clamped))),
            ])
        });
        b.lap(format!("simulate {group}"));
        note_failures(b, &group, &records);
        let rt = column(&records, "R_tilde");
        let m = mean_with_stderr(&rt);
        b.agg(format!("{group} mean R_tilde"), m.estimate, Some(m.stderr));
        let clamped = column(&records, "clamped").iter().sum::<f64>();
        b.agg(format!("{group} clamped estimates"), clamped, None);
        if c.alphas.contains(&alpha) {
            let a = mean_with_stderr(&column(&records, "alpha_hat"));
            b.agg(
                format!("{group} mean alpha_hat"),
                a.estimate,
                Some(a.stderr),
            );
            // table noise enters through the inversion
            let slope = table.dlambda_at(alpha)?.abs();
            let lam_se = table
                .entry(alpha)
                .map_or_else(|| nearest_stderr(&table, alpha), |r| r.lambda_stderr);
            let table_se = if slope > 0.0 {
                lam_se / slope
            } else {
                f64::INFINITY
            };
            let joint = (a.stderr * a.stderr + table_se * table_se).sqrt();
            b.verdicts.push(Verdict::within(
                &format!("mean-alpha[{group}]"),
                "mean alpha_hat vs alpha".into(),
                a.estimate,
                alpha,
                c.se_multiplier * joint,
                &format!(
                    "|observed - target| <= {} joint stderr (MC and table)",
                    c.se_multiplier
                ),
            ));
            let v = crate::mc::variance_with_stderr(&rt);
            let nvar = c.n as f64 * v.estimate;
            b.agg(
                format!("{group} n var R_tilde"),
                nvar,
                Some(c.n as f64 * v.stderr),
            );
            let sig = table.sigma_sq_at(alpha)?;
            b.verdicts.push(Verdict::within(
                &format!("nvar-R_tilde[{group}]"),
                "n var(R~^{2,n}) / table sigma~^2(alpha)".into(),
                nvar / sig,
                1.0,
                c.var_tolerance,
                "|observed - 1| <= relative tolerance",
            ));
            if alpha == 2.0 {
                b.verdicts.push(Verdict::within(
                    &format!("mean-R_tilde[{group}]"),
                    "mean R~^{2,n} vs Lambda_1(1/2) at alpha = 2".into(),
                    m.estimate,
                    l_half,
                    c.se_multiplier * m.stderr,
                    &format!("|observed - target| <= {} MC stderr", c.se_multiplier),
                ));
            }
        }
        if c.zero_crossing_alphas.contains(&alpha) {
            let z = mean_with_stderr(&column(&records, "R0_tilde"));
            b.agg(format!("{group} mean R0_tilde"), z.estimate, Some(z.stderr));
            b.verdicts.push(Verdict::within(
                &format!("zero-crossing[{group}]"),
                "mean zero-crossing statistic on disjoint second increments vs 1/2".into(),
                z.estimate,
                0.5,
                c.se_multiplier * z.stderr,
                &format!("|observed - target| <= {} MC stderr", c.se_multiplier),
            ));
        }
        b.records.extend(records);
    }
    match table.entry(2.0) {
        Some(row) => b.verdicts.push(Verdict::within(
            "table-anchor[alpha=2]",
            "table Lambda~(2) (raw Monte Carlo) vs Lambda_1(1/2)".into(),
            row.lambda_raw,
            l_half,
            c.se_multiplier * row.lambda_stderr,
            &format!("|observed - target| <= {} MC stderr", c.se_multiplier),
        )),
        None => b
            .warnings
            .push("stable table has no alpha = 2 row; anchor not checked".into()),
    }
    Ok(())
}

fn nearest_stderr(table: &roughir_core::LambdaTildeTable, alpha: f64) -> f64 {
    table
        .rows()
        .iter()
        .min_by(|a, b| (a.alpha - alpha).abs().total_cmp(&(b.alpha - alpha).abs()))
        .map_or(0.0, |r| r.lambda_stderr)
}

fn smooth_limit(c: &SmoothLimitConfig, b: &mut Builder) -> Result<()> {
    if c.ns.is_empty() {
        return Err(Error::Config(
            "smooth-limit needs at least one grid size".into(),
        ));
    }
    let osc: Func = c.oscillating.parse()?;
    let mut values = Vec::new();
    for &n in &c.ns {
        let path = SampledPath::from_fn(n, |t| osc.eval(t))?;
        let r = r_pn(&path, 1)?.value;
        values.push(r);
        b.records.push(Record {
            group: format!("f={}", c.oscillating),
            rep: n,
            values: [("R1".to_string(), r)].into(),
            error: None,
        });
        b.agg(format!("R1({}) at n={n}", c.oscillating), r, None);
        if n == c.threshold_n {
            b.verdicts.push(Verdict::at_least(
                &format!("threshold[n={n}]"),
                format!("R^{{1,n}}({}) at n = {n}", c.oscillating),
                r,
                c.threshold,
            ));
        }
    }
    if !c.ns.contains(&c.threshold_n) {
        b.warnings.push(format!(
            "threshold_n = {} is not among the grid sizes",
            c.threshold_n
        ));
    }
    let worst_drop = values
        .windows(2)
        .map(|w| w[0] - w[1])
        .fold(f64::NEG_INFINITY, f64::max);
    if values.len() > 1 {
        b.verdicts.push(Verdict::at_most(
            "nondecreasing",
            "largest decrease of R^{1,n} between consecutive grid sizes".into(),
            worst_drop,
            c.slack,
        ));
    }
    for f in &c.monotone {
        let func: Func = f.parse()?;
        let mut worst: f64 = 1.0;
        for &n in &c.ns {
            let path = SampledPath::from_fn(n, |t| func.eval(t))?;
            let r = r_pn(&path, 1)?.value;
            worst = worst.min(r);
            b.records.push(Record {
                group: format!("f={f}"),
                rep: n,
                values: [("R1".to_string(), r)].into(),
                error: None,
            });
        }
        b.verdicts.push(Verdict::within(
            &format!("monotone[{f}]"),
            format!("smallest R^{{1,n}}({f}) over grid sizes equals 1"),
            worst,
            1.0,
            0.0,
            "exact equality",
        ));
    }
    b.lap("compute");
    Ok(())
}

fn local_mbm(c: &LocalMbmConfig, b: &mut Builder) -> Result<()> {
    check_reps(c.reps, 2)?;
    let hfunc: Func = c.hfunc.parse()?;
    let gen = MbmGenerator::new(c.n, &hfunc)?;
    if gen.jitter() > 0.0 {
        b.warnings.push(format!(
            "mBm covariance needed relative jitter {:e}",
            gen.jitter()
        ));
    }
    b.lap("factor covariance");
    let m = 100_000;
    let h_bar = (0..m)
        .map(|i| hfunc.eval((i as f64 + 0.5) / m as f64))
        .sum::<f64>()
        / m as f64;
    let [ta, tb] = c.t0s;
    let expect_up = hfunc.eval(tb) > hfunc.eval(ta);
    let records = replicate("paths", c.reps, |rep| {
        let path = gen.sample(&mut rep_rng(c.seed, stream::EXP_LOCAL_MBM, 0, rep));
        let r2 = r_pn(&path, 2)?.value;
        let mut vals = vec![("R2", r2), ("mean_exponent", (r2 - c.intercept) / c.slope)];
        let ha = invert_lambda2(r_local(&path, ta, c.window)?.value);
        let hb = invert_lambda2(r_local(&path, tb, c.window)?.value);
        let ordered = match (ha, hb) {
            (Ok(ha), Ok(hb)) => {
                vals.extend([("h_local_a", ha), ("h_local_b", hb)]);
                (hb > ha) == expect_up
            }
            _ => false,
        };
        vals.push(("ordered", f64::from(u8::from(ordered))));
        Ok(vals)
    });
    b.lap("simulate");
    note_failures(b, "paths", &records);
    let e = mean_with_stderr(&column(&records, "mean_exponent"));
    b.agg(
        "mean (R2 - intercept) / slope".into(),
        e.estimate,
        Some(e.stderr),
    );
    b.agg("integral of H(t)".into(), h_bar, None);
    b.verdicts.push(Verdict::within(
        "mean-exponent",
        "linearized mean exponent (R^{2,n} - intercept) / slope vs integral of H(t)".into(),
        e.estimate,
        h_bar,
        c.tolerance,
        "|observed - target| <= tolerance",
    ));
    let ordered = column(&records, "ordered").iter().sum::<f64>() / records.len() as f64;
    b.agg(
        "fraction of correctly ordered local estimates".into(),
        ordered,
        None,
    );
    b.verdicts.push(Verdict::at_least(
        "local-ordering",
        format!("fraction of paths with H_hat({ta}) and H_hat({tb}) ordered like H(t)"),
        ordered,
        c.min_ordered,
    ));
    b.records.extend(records);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_json_round_trip_and_defaults() {
        for name in NAMES {
            let c = ExperimentConfig::default_for(name).unwrap();
            assert_eq!(c.name(), name);
            let j = serde_json::to_string(&c).unwrap();
            let back: ExperimentConfig = serde_json::from_str(&j).unwrap();
            assert_eq!(back, c);
        }
        // missing fields fall back to defaults
        let c: ExperimentConfig =
            serde_json::from_str(r#"{"experiment":"clt-fbm","reps":10}"#).unwrap();
        match c {
            ExperimentConfig::CltFbm(c) => {
                assert_eq!(c.reps, 10);
                assert_eq!(c.n, 4096);
            }
            _ => panic!(),
        }
        assert!(ExperimentConfig::default_for("nope").is_err());
    }

    #[test]
    fn overrides() {
        let mut c = ExperimentConfig::default_for("trend-robustness").unwrap();
        let o = Overrides {
            alpha: Some(vec![1.0]),
            ..Default::default()
        };
        assert!(c.apply(&o).is_err());
        let o = Overrides {
            n: Some(vec![256]),
            reps: Some(5),
            ..Default::default()
        };
        c.apply(&o).unwrap();
        match c {
            ExperimentConfig::TrendRobustness(t) => {
                assert_eq!(t.n, 256);
                assert_eq!(t.pairs, 5);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn smooth_limit_passes_and_is_deterministic() {
        let c = ExperimentConfig::SmoothLimit(SmoothLimitConfig {
            ns: vec![1000, 10_000],
            ..Default::default()
        });
        let mut t = Tables::in_memory(None, None);
        let r = run(&c, &mut t).unwrap();
        assert!(r.passed(), "{}", r.summary());
        let r2 = run(&c, &mut t).unwrap();
        assert_eq!(r.verdicts, r2.verdicts);
    }

    #[test]
    fn slope_of_line() {
        assert!((ls_slope(&[1.0, 2.0, 3.0], &[1.0, 3.0, 5.0]) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn report_json_and_tsv() {
        let c = ExperimentConfig::TrendRobustness(TrendRobustnessConfig {
            n: 256,
            pairs: 4,
            ..Default::default()
        });
        let mut t = Tables::in_memory(None, None);
        let r = run(&c, &mut t).unwrap();
        let back = ExperimentReport::from_json(&r.to_json()).unwrap();
        assert_eq!(back.config, r.config);
        assert_eq!(back.records, r.records);
        let tsv = r.records_tsv();
        assert_eq!(tsv.lines().count(), 5);
        assert!(tsv.starts_with("group\trep\tabs_diff\th_x\th_z\terror"));
    }
}
