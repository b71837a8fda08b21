//! CSV and manifest writers. Files are staged in the target directory and
//! renamed into place.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use tempfile::NamedTempFile;

use crate::error::CliError;

/// Formats a real with 9 significant digits, shortest form.
pub fn fmt_real(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("scientific notation parses");
    let a = rounded.abs();
    if rounded != 0.0 && !(1e-5..1e15).contains(&a) {
        format!("{rounded:e}")
    } else {
        format!("{rounded}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Real(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Real(x) => fmt_real(*x),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Real(x)
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Writes `contents` to `path` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let io_err = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(io_err)?;
    let mut tmp = NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(contents.as_bytes()).map_err(io_err)?;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

/// Record of one CLI invocation.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub subcommand: String,
    pub seed: u64,
    pub duration: Duration,
    pub outputs: Vec<PathBuf>,
    /// Extra grid arguments as `(name, values)`.
    pub grids: crate::Grids,
    pub config_echo: String,
}

impl RunManifest {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "tool_version = \"{}\"", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(out, "subcommand = \"{}\"", self.subcommand);
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "duration_seconds = {:.3}", self.duration.as_secs_f64());
        let outputs: Vec<String> = self
            .outputs
            .iter()
            .map(|p| format!("\"{}\"", p.display().to_string().replace('\\', "\\\\")))
            .collect();
        let _ = writeln!(out, "outputs = [{}]", outputs.join(", "));
        let _ = writeln!(out, "\n[grids]");
        for (name, values) in &self.grids {
            let v: Vec<String> = values.iter().map(|x| format!("{x:?}")).collect();
            let _ = writeln!(out, "{name} = [{}]", v.join(", "));
        }
        let _ = writeln!(out, "\n[config]");
        out.push_str(&self.config_echo);
        out
    }
}
