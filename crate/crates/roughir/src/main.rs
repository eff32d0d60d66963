use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use roughir::core::gaussian::{lambda, lambda_p, s2_sq, INVERSION_TOL};
use roughir::core::interp::bisect;
use roughir::core::normal::two_sided_z;
use roughir::core::{estimate_alpha, estimate_h, r_local, r_pn, Error as CoreError, IrSummary};
use roughir::experiment::{self, ExperimentConfig, ExperimentReport, Overrides};
use roughir::sim::{self, SimSpec};
use roughir::tables::{Tables, DEFAULT_TABLE_SEED};
use roughir::{io, mc, Error};

/// Exit codes: 0 success (all verdicts passed), 1 a verdict failed,
/// 2 usage, parse or configuration error, 3 any other error.
const EXIT_VERDICT: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_OTHER: u8 = 3;

/// Root seed for `simulate` when neither flags nor config give one.
const DEFAULT_SIM_SEED: u64 = 1;

#[derive(Parser)]
#[command(
    name = "roughir",
    version,
    about = "Increment-ratio roughness estimation and simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    /// Hurst exponent from R^{p,n}
    Hurst,
    /// Stable index from the disjoint second-increment statistic
    Alpha,
    /// Local Hurst exponent around --t0
    Local,
}

#[derive(Clone, Copy, ValueEnum)]
enum TableKind {
    Gaussian,
    Stable,
}

#[derive(clap::Args)]
struct TableArgs {
    /// Table directory [default: $ROUGHIR_TABLE_DIR or ./roughir-tables]
    #[arg(long)]
    table_dir: Option<PathBuf>,
    /// Fail instead of building missing tables
    #[arg(long)]
    strict: bool,
}

impl TableArgs {
    fn tables(&self) -> Tables {
        Tables::from_dir(
            self.table_dir.clone().unwrap_or_else(io::default_table_dir),
            self.strict,
        )
    }
}

#[derive(Subcommand)]
enum Command {
    /// Estimate a roughness index from a path file
    Estimate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "hurst")]
        method: Method,
        /// Increment order for --method hurst
        #[arg(long, default_value_t = 2)]
        p: usize,
        #[arg(long)]
        t0: Option<f64>,
        /// Window exponent w: the local window spans n^w samples each side
        #[arg(long, default_value_t = 0.8)]
        window: f64,
        #[arg(long, default_value_t = 0.95)]
        confidence: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        tables: TableArgs,
    },
    /// Simulate a path and write it as a path file
    Simulate {
        /// Flat key=value file (kind, n, seed and process parameters)
        #[arg(long)]
        config: Option<PathBuf>,
        /// brownian, fbm, mbm, multiscale_fbm, diffusion, levy_stable, levy_compound
        #[arg(long)]
        kind: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        /// Root seed [default: 1]
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        h: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        /// Extra process parameter as key=value (repeatable)
        #[arg(long = "param", value_name = "KEY=VALUE")]
        params: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a limit table by Monte Carlo
    Tables {
        #[arg(long, value_enum)]
        kind: TableKind,
        /// Paths per grid point (gaussian) or chain terms (stable)
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_TABLE_SEED)]
        seed: u64,
        /// Path length for the gaussian table
        #[arg(long, default_value_t = mc::DEFAULT_PATH_LEN)]
        path_len: usize,
        /// Comma-separated H grid (gaussian, p = 2; p = 1 rows use H < 0.75)
        #[arg(long, value_delimiter = ',')]
        h: Option<Vec<f64>>,
        /// Comma-separated alpha grid (stable)
        #[arg(long, value_delimiter = ',')]
        alpha: Option<Vec<f64>>,
        /// Output file [default: the table directory's standard file]
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        table_dir: Option<PathBuf>,
    },
    /// Run a verification experiment
    Experiment {
        /// clt-fbm, diffusion-rate, trend-robustness, levy-clt, smooth-limit, local-mbm
        name: Option<String>,
        /// Re-run the configuration embedded in a previous report
        #[arg(long, conflicts_with = "name")]
        replay: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        h: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        alpha: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<usize>>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        confidence: Option<f64>,
        /// Report file (JSON); a .reps.tsv appendix is written next to it
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        tables: TableArgs,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse { .. } | Error::Config(_) => EXIT_USAGE,
        _ => EXIT_OTHER,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cmd: Command) -> roughir::Result<u8> {
    match cmd {
        Command::Estimate {
            input,
            method,
            p,
            t0,
            window,
            confidence,
            out,
            tables,
        } => estimate(
            &input,
            method,
            p,
            t0,
            window,
            confidence,
            out.as_deref(),
            tables.tables(),
        ),
        Command::Simulate {
            config,
            kind,
            n,
            seed,
            h,
            alpha,
            params,
            out,
        } => {
            let mut map = match &config {
                Some(c) => io::read_config(c)?,
                None => BTreeMap::new(),
            };
            let flags = [
                ("kind", kind),
                ("n", n.map(|v| v.to_string())),
                ("seed", seed.map(|v| v.to_string())),
                ("h", h.map(|v| v.to_string())),
                ("alpha", alpha.map(|v| v.to_string())),
            ];
            for (k, v) in flags {
                if let Some(v) = v {
                    map.insert(k.to_string(), v);
                }
            }
            map.entry("seed".into())
                .or_insert_with(|| DEFAULT_SIM_SEED.to_string());
            for kv in params {
                let (k, v) = kv.split_once('=').ok_or_else(|| {
                    Error::Config(format!("--param expects key=value, got '{kv}'"))
                })?;
                map.insert(k.trim().to_string(), v.trim().to_string());
            }
            let spec = SimSpec::from_params(&map)?;
            let path = sim::simulate(&spec)?;
            io::write_path(&out, &path, &io::sim_header(&spec))?;
            eprintln!("wrote {} ({spec})", out.display());
            Ok(0)
        }
        Command::Tables {
            kind,
            reps,
            seed,
            path_len,
            h,
            alpha,
            out,
            table_dir,
        } => {
            let dir = table_dir.unwrap_or_else(io::default_table_dir);
            let (text, dest) = match kind {
                TableKind::Gaussian => {
                    if alpha.is_some() {
                        return Err(Error::Config("--alpha applies to stable tables".into()));
                    }
                    let reps = reps.unwrap_or(mc::DEFAULT_GAUSSIAN_REPS);
                    let grid = match h {
                        None => mc::default_gaussian_grid(),
                        Some(hs) => {
                            let mut g: Vec<(usize, f64)> =
                                hs.iter().filter(|&&h| h < 0.75).map(|&h| (1, h)).collect();
                            g.extend(hs.iter().map(|&h| (2, h)));
                            g
                        }
                    };
                    let mut warnings = Vec::new();
                    if reps < mc::DEFAULT_GAUSSIAN_REPS {
                        warnings.push(format!(
                            "replications below default ({reps} < {})",
                            mc::DEFAULT_GAUSSIAN_REPS
                        ));
                    }
                    let t = mc::build_variance_table(&grid, reps, path_len, seed)?;
                    (
                        io::format_variance_table(&t, &warnings),
                        dir.join(io::GAUSSIAN_FILE),
                    )
                }
                TableKind::Stable => {
                    if h.is_some() {
                        return Err(Error::Config("--h applies to gaussian tables".into()));
                    }
                    let reps = reps.unwrap_or(mc::DEFAULT_STABLE_REPS);
                    let grid = alpha.unwrap_or_else(mc::default_stable_grid);
                    let mut warnings = Vec::new();
                    if reps < mc::DEFAULT_STABLE_REPS {
                        warnings.push(format!(
                            "chain terms below default ({reps} < {})",
                            mc::DEFAULT_STABLE_REPS
                        ));
                    }
                    let t = mc::build_stable_table(&grid, reps, seed)?;
                    let v = t.monotonicity_violations();
                    if !v.is_empty() {
                        warnings.push(format!(
                            "raw lambda increases beyond 3 stderr at grid rows {v:?}"
                        ));
                    }
                    (
                        io::format_stable_table(&t, &warnings),
                        dir.join(io::STABLE_FILE),
                    )
                }
            };
            let dest = out.unwrap_or(dest);
            io::write_atomic(&dest, &text)?;
            eprintln!("wrote {}", dest.display());
            Ok(0)
        }
        Command::Experiment {
            name,
            replay,
            h,
            alpha,
            n,
            reps,
            seed,
            confidence,
            out,
            tables,
        } => {
            let overrides = Overrides {
                h,
                alpha,
                n,
                reps,
                seed,
                confidence,
            };
            let config = match (name, replay) {
                (Some(name), None) => {
                    let mut c = ExperimentConfig::default_for(&name)?;
                    c.apply(&overrides)?;
                    c
                }
                (None, Some(file)) => {
                    let text = std::fs::read_to_string(&file).map_err(|e| Error::Io {
                        path: file.clone(),
                        source: e,
                    })?;
                    let mut c = ExperimentReport::from_json(&text)?.config;
                    c.apply(&overrides)?;
                    c
                }
                _ => {
                    return Err(Error::Config(format!(
                        "name an experiment ({}) or pass --replay REPORT",
                        experiment::NAMES.join(", ")
                    )))
                }
            };
            let mut tables = tables.tables();
            let report = experiment::run(&config, &mut tables)?;
            print!("{}", report.summary());
            if let Some(out) = out {
                io::write_atomic(&out, &report.to_json())?;
                io::write_atomic(&appendix_path(&out), &report.records_tsv())?;
                eprintln!("wrote {}", out.display());
            }
            Ok(if report.passed() { 0 } else { EXIT_VERDICT })
        }
    }
}

fn appendix_path(report: &Path) -> PathBuf {
    let stem = report
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    report.with_file_name(format!("{stem}.reps.tsv"))
}

fn degenerate(name: &str, s: &IrSummary) -> roughir::Result<()> {
    if s.is_degenerate() {
        return Err(Error::Degenerate(format!(
            "{name} is dominated by 0/0 terms ({} of {}); the path looks constant or quantized",
            s.zero_over_zero, s.terms
        )));
    }
    Ok(())
}

fn push_summary(s: &mut String, name: &str, st: &IrSummary) {
    let _ = writeln!(s, "statistic={name}");
    let _ = writeln!(s, "value={}", st.value);
    let _ = writeln!(s, "terms={}", st.terms);
    let _ = writeln!(s, "zero_over_zero={}", st.zero_over_zero);
}

/// `Lambda_1^{-1}` on `(0, 1)`.
fn invert_lambda1(v: f64) -> roughir::Result<f64> {
    let low = lambda(-0.5)?;
    if !(v > low && v < 1.0) {
        return Err(CoreError::OutOfRange {
            value: v,
            low,
            high: 1.0,
            nearest: if v <= low { 0.0 } else { 1.0 },
        }
        .into());
    }
    let f = |h: f64| lambda_p(1, h).map(|l| l - v).unwrap_or(f64::NAN);
    Ok(bisect(f, 0.0, 1.0, INVERSION_TOL, true))
}

#[allow(clippy::too_many_arguments)]
fn estimate(
    input: &Path,
    method: Method,
    p: usize,
    t0: Option<f64>,
    window: f64,
    confidence: f64,
    out: Option<&Path>,
    mut tables: Tables,
) -> roughir::Result<u8> {
    let file = io::read_path(input)?;
    let path = &file.path;
    let n = path.n();
    let z = two_sided_z(confidence)
        .ok_or_else(|| Error::Config(format!("confidence {confidence} is not in (0, 1)")))?;
    let mut s = String::new();
    let _ = writeln!(s, "input={}", input.display());
    let _ = writeln!(s, "n={n}");
    match method {
        Method::Hurst if p == 2 => {
            let st = r_pn(path, 2)?;
            degenerate("R^{2,n}", &st)?;
            let e = estimate_h(path, tables.gaussian()?, confidence)?;
            let _ = writeln!(s, "method=hurst");
            push_summary(&mut s, "R^{2,n}", &e.statistic);
            let _ = writeln!(s, "h_hat={}", e.h_hat);
            let _ = writeln!(s, "stderr={}", e.stderr);
            let _ = writeln!(
                s,
                "ci_low={}\nci_high={}\nconfidence={confidence}",
                e.ci_low, e.ci_high
            );
        }
        Method::Hurst if p == 1 => {
            let st = r_pn(path, 1)?;
            degenerate("R^{1,n}", &st)?;
            let h = invert_lambda1(st.value)?;
            let _ = writeln!(s, "method=hurst");
            push_summary(&mut s, "R^{1,n}", &st);
            let _ = writeln!(s, "h_hat={h}");
            // delta method with a numerical derivative of Lambda_1
            let d = 1e-6;
            let slope = (lambda_p(1, (h + d).min(1.0 - 1e-12))? - lambda_p(1, (h - d).max(1e-12))?)
                / (2.0 * d);
            match tables.gaussian()?.sigma_at(1, h) {
                Ok(sigma) => {
                    let se = (sigma / n as f64).sqrt() / slope;
                    let _ = writeln!(s, "stderr={se}");
                    let _ = writeln!(
                        s,
                        "ci_low={}\nci_high={}\nconfidence={confidence}",
                        h - z * se,
                        h + z * se
                    );
                }
                Err(e) => {
                    let _ = writeln!(s, "stderr_unavailable={e}");
                }
            }
        }
        Method::Hurst => {
            return Err(Error::Config(format!("--p must be 1 or 2, got {p}")));
        }
        Method::Alpha => {
            let e = estimate_alpha(path, tables.stable()?, confidence)?;
            degenerate("R~^{2,n}", &e.statistic)?;
            let _ = writeln!(s, "method=alpha");
            push_summary(&mut s, "R~^{2,n}", &e.statistic);
            let _ = writeln!(s, "alpha_hat={}", e.alpha_hat);
            let _ = writeln!(s, "stderr={}", e.stderr);
            let _ = writeln!(
                s,
                "ci_low={}\nci_high={}\nconfidence={confidence}",
                e.ci_low, e.ci_high
            );
            let _ = writeln!(s, "clamped={}", e.clamped);
        }
        Method::Local => {
            let t0 = t0.ok_or_else(|| Error::Config("--method local needs --t0".into()))?;
            let st = r_local(path, t0, window)?;
            degenerate("R_loc^{2,n}(t0)", &st)?;
            let h = roughir::core::invert_lambda2(st.value)?;
            let _ = writeln!(s, "method=local\nt0={t0}\nwindow={window}");
            push_summary(&mut s, "R_loc^{2,n}(t0)", &st);
            let _ = writeln!(s, "h_hat={h}");
            match tables.gaussian()?.sigma_at(2, h) {
                Ok(sigma) => {
                    let se = (s2_sq(h, sigma)? / st.terms as f64).sqrt();
                    let _ = writeln!(s, "stderr={se}");
                    let _ = writeln!(
                        s,
                        "ci_low={}\nci_high={}\nconfidence={confidence}",
                        h - z * se,
                        h + z * se
                    );
                }
                Err(e) => {
                    let _ = writeln!(s, "stderr_unavailable={e}");
                }
            }
        }
    }
    for w in &tables.warnings {
        eprintln!("warning: {w}");
        let _ = writeln!(s, "warning={w}");
    }
    print!("{s}");
    if let Some(out) = out {
        io::write_atomic(out, &s)?;
    }
    Ok(0)
}
