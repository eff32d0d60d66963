//! Text file formats: sampled paths, limit tables and flat config files.
//!
//! Path file:
//!
//! ```text
//! # schema=roughir-path-v1
//! # n=4
//! # kind=fbm
//! # seed=1
//! # param.h=0.7
//! 0.0000000000000000e0    0.0000000000000000e0
//! 2.5000000000000000e-1    -4.1873912587211913e-1
//! ...
//! ```
//!
//! Rows are `t<TAB>value` with 17 significant digits, so values round-trip
//! bit-exactly. Table files start with `# schema=roughir-table-v1` and
//! `# kind=gaussian|stable`, followed by a tab-separated column line and
//! rows. All writes go to a temporary file that is then renamed.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use roughir_core::stable::StableRow;
use roughir_core::variance_table::VarianceRow;
use roughir_core::{LambdaTildeTable, SampledPath, VarianceTable};

use crate::error::{Error, Result};
use crate::sim::SimSpec;

pub const PATH_SCHEMA: &str = "roughir-path-v1";
pub const TABLE_SCHEMA: &str = "roughir-table-v1";
pub const TABLE_DIR_ENV: &str = "ROUGHIR_TABLE_DIR";
pub const DEFAULT_TABLE_DIR: &str = "roughir-tables";
pub const GAUSSIAN_FILE: &str = "gaussian.tsv";
pub const STABLE_FILE: &str = "stable.tsv";

const GAUSSIAN_COLUMNS: [&str; 7] = ["H", "p", "Sigma", "mc_stderr", "reps", "path_len", "seed"];
const STABLE_COLUMNS: [&str; 9] = [
    "alpha",
    "lambda",
    "lambda_raw",
    "lambda_stderr",
    "sigma_sq",
    "sigma_sq_stderr",
    "dlambda_dalpha",
    "reps",
    "seed",
];

/// Writes `contents` to a sibling temporary file and renames it over `dest`.
pub fn write_atomic(dest: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = dest.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let name = dest
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dest.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, dest).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(dest, e)
    })
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// A path together with its `# key=value` header.
#[derive(Debug, Clone, PartialEq)]
pub struct PathFile {
    pub header: Vec<(String, String)>,
    pub path: SampledPath,
}

impl PathFile {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.header
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

/// Header for a simulated path: schema, n, kind, seed and `param.*` keys.
pub fn sim_header(spec: &SimSpec) -> Vec<(String, String)> {
    let mut h = vec![
        ("n".to_string(), spec.n.to_string()),
        ("kind".to_string(), spec.process.kind().to_string()),
        ("seed".to_string(), spec.seed.to_string()),
    ];
    h.extend(
        spec.params()
            .into_iter()
            .map(|(k, v)| (format!("param.{k}"), v)),
    );
    h
}

/// Recovers the simulation spec from a path header written by
/// [`sim_header`].
pub fn spec_from_header(file: &PathFile) -> Result<SimSpec> {
    let mut map = BTreeMap::new();
    for (k, v) in &file.header {
        match k.as_str() {
            "n" | "kind" | "seed" => {
                map.insert(k.clone(), v.clone());
            }
            _ => {
                if let Some(p) = k.strip_prefix("param.") {
                    map.insert(p.to_string(), v.clone());
                }
            }
        }
    }
    SimSpec::from_params(&map)
}

pub fn format_path(path: &SampledPath, header: &[(String, String)]) -> String {
    let mut s = String::with_capacity(48 * (path.n() + 8));
    let _ = writeln!(s, "# schema={PATH_SCHEMA}");
    if !header.iter().any(|(k, _)| k == "n") {
        let _ = writeln!(s, "# n={}", path.n());
    }
    for (k, v) in header {
        let _ = writeln!(s, "# {k}={v}");
    }
    for (j, v) in path.values().iter().enumerate() {
        let _ = writeln!(s, "{:.16e}\t{:.16e}", path.time(j), v);
    }
    s
}

pub fn write_path(dest: &Path, path: &SampledPath, header: &[(String, String)]) -> Result<()> {
    write_atomic(dest, &format_path(path, header))
}

fn parse_header_line(line: &str) -> Option<(String, String)> {
    let body = line.strip_prefix('#')?.trim();
    let (k, v) = body.split_once('=')?;
    Some((k.trim().to_string(), v.trim().to_string()))
}

/// Parses a path file. `source` names the input in error messages.
pub fn parse_path(text: &str, source: &Path) -> Result<PathFile> {
    let err = |line: usize, msg: String| Error::Parse {
        path: source.to_path_buf(),
        line,
        msg,
    };
    let mut header = Vec::new();
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut first_row = 0;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            if let Some(kv) = parse_header_line(line) {
                header.push(kv);
            }
            continue;
        }
        if first_row == 0 {
            first_row = line_no;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [t, v] = fields[..] else {
            return Err(err(
                line_no,
                format!("expected 2 columns (t, value), found {}", fields.len()),
            ));
        };
        let parse = |s: &str, what: &str| -> Result<f64> {
            let x: f64 = s
                .parse()
                .map_err(|_| err(line_no, format!("{what} '{s}' is not a number")))?;
            if !x.is_finite() {
                return Err(err(line_no, format!("{what} '{s}' is not finite")));
            }
            Ok(x)
        };
        times.push((line_no, parse(t, "time")?));
        values.push(parse(v, "value")?);
    }
    let file_label = |msg: String| err(0, msg);
    if let Some((_, s)) = header.iter().find(|(k, _)| k == "schema") {
        if s != PATH_SCHEMA {
            return Err(file_label(format!(
                "unsupported schema '{s}', expected {PATH_SCHEMA}"
            )));
        }
    }
    if values.len() < 2 {
        return Err(file_label(format!(
            "need at least 2 samples, found {}",
            values.len()
        )));
    }
    let n = values.len() - 1;
    if let Some((_, s)) = header.iter().find(|(k, _)| k == "n") {
        let declared: usize = s
            .parse()
            .map_err(|_| file_label(format!("header n='{s}' is not an integer")))?;
        if declared != n {
            return Err(file_label(format!(
                "header declares n={declared} but the file has {} rows",
                n + 1
            )));
        }
    }
    for (j, &(line_no, t)) in times.iter().enumerate() {
        let want = j as f64 / n as f64;
        if (t - want).abs() > 1e-9 {
            return Err(err(
                line_no,
                format!("time {t} is off the grid j/n = {want}"),
            ));
        }
    }
    Ok(PathFile {
        header,
        path: SampledPath::new(values)?,
    })
}

pub fn read_path(source: &Path) -> Result<PathFile> {
    parse_path(&read(source)?, source)
}

/// Flat `key=value` lines; `#` starts a comment line. Duplicate keys are an
/// error.
pub fn parse_config(text: &str, source: &Path) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: source.to_path_buf(),
            line: i + 1,
            msg,
        };
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected key=value, got '{line}'")))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(err("empty key".into()));
        }
        if map.insert(k.to_string(), v.trim().to_string()).is_some() {
            return Err(err(format!("duplicate key '{k}'")));
        }
    }
    Ok(map)
}

pub fn read_config(source: &Path) -> Result<BTreeMap<String, String>> {
    parse_config(&read(source)?, source)
}

pub fn format_variance_table(t: &VarianceTable, warnings: &[String]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# schema={TABLE_SCHEMA}");
    let _ = writeln!(s, "# kind=gaussian");
    let _ = writeln!(s, "# lag_truncation={}", t.lag_truncation);
    for w in warnings {
        let _ = writeln!(s, "# warning={w}");
    }
    let _ = writeln!(s, "{}", GAUSSIAN_COLUMNS.join("\t"));
    for r in t.rows() {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.h, r.p, r.sigma, r.mc_stderr, r.reps, r.path_len, r.seed
        );
    }
    s
}

pub fn format_stable_table(t: &LambdaTildeTable, warnings: &[String]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# schema={TABLE_SCHEMA}");
    let _ = writeln!(s, "# kind=stable");
    let _ = writeln!(s, "# reps={}", t.reps);
    let _ = writeln!(s, "# seed={}", t.seed);
    for w in warnings {
        let _ = writeln!(s, "# warning={w}");
    }
    let _ = writeln!(s, "{}", STABLE_COLUMNS.join("\t"));
    for r in t.rows() {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.alpha,
            r.lambda,
            r.lambda_raw,
            r.lambda_stderr,
            r.sigma_sq,
            r.sigma_sq_stderr,
            r.dlambda_dalpha,
            t.reps,
            t.seed
        );
    }
    s
}

/// Header map, and rows as `(line, fields)`, of a table file.
struct RawTable {
    header: BTreeMap<String, String>,
    warnings: Vec<String>,
    rows: Vec<(usize, Vec<String>)>,
}

fn parse_table(text: &str, source: &Path, kind: &str, columns: &[&str]) -> Result<RawTable> {
    let err = |line: usize, msg: String| Error::Parse {
        path: source.to_path_buf(),
        line,
        msg,
    };
    let mut header = BTreeMap::new();
    let mut warnings = Vec::new();
    let mut rows = Vec::new();
    let mut seen_columns = false;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end();
        if line.trim().is_empty() {
            continue;
        }
        if line.starts_with('#') {
            if let Some((k, v)) = parse_header_line(line) {
                if k == "warning" {
                    warnings.push(v);
                } else {
                    header.insert(k, v);
                }
            }
            continue;
        }
        let fields: Vec<String> = line.split('\t').map(|f| f.trim().to_string()).collect();
        if !seen_columns {
            if fields != columns {
                return Err(err(
                    line_no,
                    format!("expected columns {}", columns.join(" ")),
                ));
            }
            seen_columns = true;
            continue;
        }
        if fields.len() != columns.len() {
            return Err(err(
                line_no,
                format!("expected {} fields, found {}", columns.len(), fields.len()),
            ));
        }
        rows.push((line_no, fields));
    }
    match header.get("schema") {
        Some(s) if s == TABLE_SCHEMA => {}
        other => {
            return Err(err(
                1,
                format!("expected schema={TABLE_SCHEMA}, found {other:?}"),
            ))
        }
    }
    match header.get("kind") {
        Some(k) if k == kind => {}
        other => return Err(err(1, format!("expected kind={kind}, found {other:?}"))),
    }
    if !seen_columns {
        return Err(err(0, "missing column line".into()));
    }
    Ok(RawTable {
        header,
        warnings,
        rows,
    })
}

fn field<T: std::str::FromStr>(source: &Path, line: usize, name: &str, s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Parse {
        path: source.to_path_buf(),
        line,
        msg: format!("column {name}: cannot parse '{s}'"),
    })
}

/// Parses a Gaussian table; also returns its `# warning=` lines.
pub fn parse_variance_table(text: &str, source: &Path) -> Result<(VarianceTable, Vec<String>)> {
    let raw = parse_table(text, source, "gaussian", &GAUSSIAN_COLUMNS)?;
    let lag = match raw.header.get("lag_truncation") {
        Some(v) => field(source, 0, "lag_truncation", v)?,
        None => crate::mc::DEFAULT_LAG_TRUNCATION,
    };
    let mut rows = Vec::with_capacity(raw.rows.len());
    for (line, f) in &raw.rows {
        let c = |i: usize| f[i].as_str();
        rows.push(VarianceRow {
            h: field(source, *line, "H", c(0))?,
            p: field(source, *line, "p", c(1))?,
            sigma: field(source, *line, "Sigma", c(2))?,
            mc_stderr: field(source, *line, "mc_stderr", c(3))?,
            reps: field(source, *line, "reps", c(4))?,
            path_len: field(source, *line, "path_len", c(5))?,
            seed: field(source, *line, "seed", c(6))?,
        });
    }
    Ok((VarianceTable::new(rows, lag)?, raw.warnings))
}

pub fn parse_stable_table(text: &str, source: &Path) -> Result<(LambdaTildeTable, Vec<String>)> {
    let raw = parse_table(text, source, "stable", &STABLE_COLUMNS)?;
    let meta = |k: &str| -> Result<u64> {
        let v = raw.header.get(k).ok_or_else(|| Error::Parse {
            path: source.to_path_buf(),
            line: 0,
            msg: format!("missing header '{k}'"),
        })?;
        field(source, 0, k, v)
    };
    let reps = meta("reps")? as usize;
    let seed = meta("seed")?;
    let mut rows = Vec::with_capacity(raw.rows.len());
    for (line, f) in &raw.rows {
        let c = |i: usize| f[i].as_str();
        rows.push(StableRow {
            alpha: field(source, *line, "alpha", c(0))?,
            lambda: field(source, *line, "lambda", c(1))?,
            lambda_raw: field(source, *line, "lambda_raw", c(2))?,
            lambda_stderr: field(source, *line, "lambda_stderr", c(3))?,
            sigma_sq: field(source, *line, "sigma_sq", c(4))?,
            sigma_sq_stderr: field(source, *line, "sigma_sq_stderr", c(5))?,
            dlambda_dalpha: field(source, *line, "dlambda_dalpha", c(6))?,
        });
    }
    Ok((LambdaTildeTable::from_rows(rows, reps, seed)?, raw.warnings))
}

pub fn read_variance_table(source: &Path) -> Result<(VarianceTable, Vec<String>)> {
    parse_variance_table(&read(source)?, source)
}

pub fn read_stable_table(source: &Path) -> Result<(LambdaTildeTable, Vec<String>)> {
    parse_stable_table(&read(source)?, source)
}

/// `$ROUGHIR_TABLE_DIR`, or `roughir-tables` in the working directory.
pub fn default_table_dir() -> PathBuf {
    std::env::var_os(TABLE_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_TABLE_DIR))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn src() -> PathBuf {
        PathBuf::from("mem")
    }

    #[test]
    fn path_round_trip_is_bit_exact() {
        let vals: Vec<f64> = (0..=50)
            .map(|j| (j as f64 * 0.37).sin() * 1e-7 + 1.0 / 3.0)
            .collect();
        let p = SampledPath::new(vals).unwrap();
        let h = vec![("kind".to_string(), "data".to_string())];
        let text = format_path(&p, &h);
        let back = parse_path(&text, &src()).unwrap();
        assert_eq!(back.path, p);
        assert_eq!(back.get("kind"), Some("data"));
        assert_eq!(back.get("n"), Some("50"));
    }

    proptest::proptest! {
        #[test]
        fn any_finite_path_round_trips(vals in proptest::collection::vec(
            proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO,
            2..200,
        )) {
            let p = SampledPath::new(vals).unwrap();
            let back = parse_path(&format_path(&p, &[]), &src()).unwrap();
            proptest::prop_assert_eq!(back.path, p);
        }
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "# n=2\n0\t0\n0.5\tNaN\n1\t2\n";
        match parse_path(text, &src()) {
            Err(Error::Parse { line, msg, .. }) => {
                assert_eq!(line, 3);
                assert!(msg.contains("not finite"));
            }
            other => panic!("{other:?}"),
        }
        match parse_path("0\t0\n0.5\tabc\n1\t0\n", &src()) {
            Err(Error::Parse { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        match parse_path("0\t0\t1\n", &src()) {
            Err(Error::Parse { line: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(parse_path("# n=3\n0\t0\n0.5\t1\n1\t0\n", &src()).is_err());
        match parse_path("0\t0\n0.4\t1\n1\t0\n", &src()) {
            Err(Error::Parse { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(parse_path("0\t0\n", &src()).is_err());
    }

    #[test]
    fn config_parsing() {
        let m = parse_config("# c\nkind = fbm\n\nh=0.7\n", &src()).unwrap();
        assert_eq!(m["kind"], "fbm");
        assert_eq!(m["h"], "0.7");
        assert!(matches!(
            parse_config("a=1\na=2\n", &src()),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_config("novalue\n", &src()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn table_round_trips() {
        let rows = (1..=4)
            .map(|i| VarianceRow {
                h: i as f64 * 0.2,
                p: 2,
                sigma: 0.1 * i as f64 + 1.0 / 7.0,
                mc_stderr: 0.01,
                reps: 100,
                path_len: 64,
                seed: 42 + i,
            })
            .collect();
        let t = VarianceTable::new(rows, 50).unwrap();
        let text = format_variance_table(&t, &["low reps".to_string()]);
        let (back, w) = parse_variance_table(&text, &src()).unwrap();
        assert_eq!(back, t);
        assert_eq!(w, vec!["low reps".to_string()]);
        assert_eq!(format_variance_table(&back, &w), text);

        let raw: Vec<_> = (1..=5)
            .map(|i| {
                let a = i as f64 * 0.4;
                (a, 1.0 - a / 8.0, 1e-3, 0.2 + a / 10.0, 1e-3)
            })
            .collect();
        let st = LambdaTildeTable::from_estimates(&raw, 10_000, 3).unwrap();
        let text = format_stable_table(&st, &[]);
        let (back, _) = parse_stable_table(&text, &src()).unwrap();
        assert_eq!(back, st);
        assert!(parse_variance_table(&text, &src()).is_err());
    }
}
