//! Access to the limit tables used by the estimators: loaded from a table
//! directory, built on first use, or supplied in memory.

use std::path::PathBuf;

use roughir_core::{LambdaTildeTable, VarianceTable};

use crate::error::{Error, Result};
use crate::io;
use crate::mc;

pub const DEFAULT_TABLE_SEED: u64 = 1;

enum Source {
    Memory,
    Dir { dir: PathBuf, strict: bool },
}

pub struct Tables {
    source: Source,
    gaussian: Option<VarianceTable>,
    stable: Option<LambdaTildeTable>,
    /// Notes about where each table came from, in load order.
    pub provenance: Vec<String>,
    pub warnings: Vec<String>,
}

impl Tables {
    pub fn in_memory(gaussian: Option<VarianceTable>, stable: Option<LambdaTildeTable>) -> Self {
        Self {
            source: Source::Memory,
            gaussian,
            stable,
            provenance: vec!["in-memory tables".into()],
            warnings: Vec::new(),
        }
    }

    /// Tables from `dir`. Missing files are built with reduced replication
    /// counts and saved, with a warning, unless `strict` is set.
    pub fn from_dir(dir: PathBuf, strict: bool) -> Self {
        Self {
            source: Source::Dir { dir, strict },
            gaussian: None,
            stable: None,
            provenance: Vec::new(),
            warnings: Vec::new(),
        }
    }

    fn missing(&self, what: &str) -> Error {
        Error::Config(format!("no {what} table available"))
    }

    pub fn gaussian(&mut self) -> Result<&VarianceTable> {
        if self.gaussian.is_none() {
            let Source::Dir { dir, strict } = &self.source else {
                return Err(self.missing("gaussian"));
            };
            let file = dir.join(io::GAUSSIAN_FILE);
            let (table, notes) = if file.exists() {
                let (t, w) = io::read_variance_table(&file)?;
                self.provenance
                    .push(format!("gaussian table {}", file.display()));
                (t, w)
            } else if *strict {
                return Err(Error::Config(format!(
                    "missing {} (build it with `roughir tables --kind gaussian`)",
                    file.display()
                )));
            } else {
                let w = format!(
                    "gaussian table built automatically with {} replications (default {})",
                    mc::QUICK_GAUSSIAN_REPS,
                    mc::DEFAULT_GAUSSIAN_REPS
                );
                let t = mc::build_variance_table(
                    &mc::default_gaussian_grid(),
                    mc::QUICK_GAUSSIAN_REPS,
                    mc::DEFAULT_PATH_LEN,
                    DEFAULT_TABLE_SEED,
                )?;
                io::write_atomic(
                    &file,
                    &io::format_variance_table(&t, std::slice::from_ref(&w)),
                )?;
                self.provenance
                    .push(format!("gaussian table {} (auto-built)", file.display()));
                (t, vec![w])
            };
            self.warnings.extend(notes);
            self.gaussian = Some(table);
        }
        Ok(self.gaussian.as_ref().expect("set above"))
    }

    pub fn stable(&mut self) -> Result<&LambdaTildeTable> {
        if self.stable.is_none() {
            let Source::Dir { dir, strict } = &self.source else {
                return Err(self.missing("stable"));
            };
            let file = dir.join(io::STABLE_FILE);
            let (table, notes) = if file.exists() {
                let (t, w) = io::read_stable_table(&file)?;
                self.provenance
                    .push(format!("stable table {}", file.display()));
                (t, w)
            } else if *strict {
                return Err(Error::Config(format!(
                    "missing {} (build it with `roughir tables --kind stable`)",
                    file.display()
                )));
            } else {
                let w = format!(
                    "stable table built automatically with {} chain terms (default {})",
                    mc::QUICK_STABLE_REPS,
                    mc::DEFAULT_STABLE_REPS
                );
                let t = mc::build_stable_table(
                    &mc::default_stable_grid(),
                    mc::QUICK_STABLE_REPS,
                    DEFAULT_TABLE_SEED,
                )?;
                io::write_atomic(
                    &file,
                    &io::format_stable_table(&t, std::slice::from_ref(&w)),
                )?;
                self.provenance
                    .push(format!("stable table {} (auto-built)", file.display()));
                (t, vec![w])
            };
            self.warnings.extend(notes);
            self.stable = Some(table);
        }
        Ok(self.stable.as_ref().expect("set above"))
    }
}
