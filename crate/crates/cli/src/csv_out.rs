//! Deterministic CSV emission.
//!
//! Every document starts with a `#`-prefixed header block recording the
//! fully resolved configuration (sorted by key, so reruns are
//! byte-identical), then the column-name row, the data rows, and optional
//! `#`-prefixed footer lines carrying derived summaries. Floats are
//! always printed as `{:.16e}` (17 significant digits) so parallel sweeps
//! and reruns cannot disagree in the last digit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::Failure;

/// One CSV cell.
#[derive(Debug, Clone)]
pub enum Field {
    Float(f64),
    Int(u64),
    Text(String),
}

impl Field {
    pub fn text(s: impl Into<String>) -> Field {
        Field::Text(s.into())
    }

    fn render(&self, out: &mut String) {
        match self {
            Field::Float(v) => {
                let _ = write!(out, "{}", float(*v));
            }
            Field::Int(v) => {
                let _ = write!(out, "{v}");
            }
            Field::Text(s) => out.push_str(s),
        }
    }
}

/// The canonical float formatting for every numeric output of the tool.
pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug)]
pub struct CsvDocument {
    meta: BTreeMap<String, String>,
    columns: Vec<String>,
    rows: Vec<Vec<Field>>,
    footers: Vec<String>,
}

impl CsvDocument {
    pub fn new(columns: Vec<String>) -> CsvDocument {
        CsvDocument { meta: BTreeMap::new(), columns, rows: Vec::new(), footers: Vec::new() }
    }

    pub fn meta(&mut self, key: &str, value: impl Into<String>) {
        self.meta.insert(key.to_string(), value.into());
    }

    pub fn push_row(&mut self, row: Vec<Field>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn footer(&mut self, line: String) {
        self.footers.push(line);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (key, value) in &self.meta {
            let _ = writeln!(out, "# {key} = {value}");
        }
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let mut line = String::new();
            for (i, field) in row.iter().enumerate() {
                if i > 0 {
                    line.push(',');
                }
                field.render(&mut line);
            }
            let _ = writeln!(out, "{line}");
        }
        for footer in &self.footers {
            let _ = writeln!(out, "# {footer}");
        }
        out
    }

    /// Write to `output`, or stdout when none is given.
    pub fn write(&self, output: Option<&Path>) -> Result<(), Failure> {
        let text = self.render();
        match output {
            Some(path) => std::fs::write(path, text).map_err(|e| {
                Failure::Io(format!("cannot write {}: {e}", path.display()))
            }),
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout
                    .write_all(text.as_bytes())
                    .and_then(|()| stdout.flush())
                    .map_err(|e| Failure::Io(format!("cannot write to stdout: {e}")))
            }
        }
    }
}
