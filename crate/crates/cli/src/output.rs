//! CSV tables and the config sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult};

/// Floats are written with ten significant digits so that values survive a
/// text round trip to well within the tolerances used downstream.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:.9e}")
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Inverse of [`fmt_f64`]; empty cells read as `None`.
pub fn parse_f64(s: &str) -> Option<f64> {
    match s {
        "" => None,
        "nan" => Some(f64::NAN),
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ => s.parse().ok(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file: &'static str,
    pub header: &'static [&'static str],
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(file: &'static str, header: &'static [&'static str]) -> Self {
        Table {
            file,
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len(), "row width for {}", self.file);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| *h == name)
    }

    /// Cell `name` of `row`; panics on an unknown column.
    pub fn get<'a>(&'a self, row: &'a [String], name: &str) -> &'a str {
        let c = self
            .column(name)
            .unwrap_or_else(|| panic!("{} has no column {name}", self.file));
        &row[c]
    }

    pub fn get_f64(&self, row: &[String], name: &str) -> Option<f64> {
        parse_f64(self.get(row, name))
    }

    pub fn to_csv(&self) -> CliResult<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| CliError::Io(e.to_string());
        w.write_record(self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        w.into_inner().map_err(|e| CliError::Io(e.to_string()))
    }

    pub fn write(&self, dir: &Path) -> CliResult<PathBuf> {
        let path = dir.join(self.file);
        fs::write(&path, self.to_csv()?).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}

/// Writes `<subcommand>.config.toml` next to the CSVs: the resolved config
/// plus the tool version and the preset it started from.
pub fn write_sidecar(dir: &Path, subcommand: &str, preset: Option<&str>, resolved: &str) -> CliResult<PathBuf> {
    let path = dir.join(format!("{subcommand}.config.toml"));
    let mut text = format!("# pclab {} {subcommand}\n", env!("CARGO_PKG_VERSION"));
    text.push_str(&format!("# preset: {}\n", preset.unwrap_or("none")));
    text.push_str(resolved);
    fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(path)
}
