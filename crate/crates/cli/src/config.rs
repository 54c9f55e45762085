//! Config resolution. Later layers win:
//!
//! 1. built-in defaults of the subcommand,
//! 2. the named preset (`--preset`, or a top-level `preset = "..."` key),
//! 3. keys in the `--config` file,
//! 4. command-line flags (`--seed`, `--data-root`).
//!
//! Nested tables such as `[data]` are merged key by key.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use toml::{Table, Value};

use crate::error::{CliError, CliResult};
use crate::output::Table as CsvTable;

/// One subcommand: its config document and how to run it.
pub trait Experiment: Serialize + DeserializeOwned + Default + Clone {
    const NAME: &'static str;

    /// `(name, toml)` pairs. Preset contents are pinned by tests.
    fn presets() -> &'static [(&'static str, &'static str)];

    fn set_seed(&mut self, seed: u64);

    fn set_data_root(&mut self, _root: &Path) {}

    fn validate(&self) -> CliResult<()> {
        Ok(())
    }

    fn run(&self) -> CliResult<Vec<CsvTable>>;

    /// Inspected after the CSVs are written, so a failing run still leaves
    /// its data behind.
    fn check_outcome(&self, _tables: &[CsvTable]) -> CliResult<()> {
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub preset: Option<String>,
    pub seed: Option<u64>,
    pub data_root: Option<std::path::PathBuf>,
}

#[derive(Debug, Clone)]
pub struct Resolved<T> {
    pub config: T,
    pub preset: Option<String>,
}

impl<T: Experiment> Resolved<T> {
    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(&self.config).map_err(|e| CliError::Config(e.to_string()))
    }
}

pub fn preset_text<T: Experiment>(name: &str) -> CliResult<&'static str> {
    T::presets()
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| {
            let known: Vec<&str> = T::presets().iter().map(|(n, _)| *n).collect();
            CliError::Config(format!(
                "unknown preset '{name}' for {}; known: {}",
                T::NAME,
                known.join(", ")
            ))
        })
}

fn parse_table(text: &str, what: &str) -> CliResult<Table> {
    text.parse::<Table>()
        .map_err(|e| CliError::Config(format!("{what}: {e}")))
}

fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Applies the precedence rules above to an optional config document.
pub fn resolve<T: Experiment>(file_text: Option<&str>, ov: &Overrides) -> CliResult<Resolved<T>> {
    let mut file = match file_text {
        Some(t) => parse_table(t, "config file")?,
        None => Table::new(),
    };
    let file_preset = match file.remove("preset") {
        None => None,
        Some(Value::String(s)) => Some(s),
        Some(_) => return Err(CliError::Config("'preset' must be a string".into())),
    };
    let preset = ov.preset.clone().or(file_preset);
    let mut merged = match &preset {
        Some(name) => parse_table(preset_text::<T>(name)?, name)?,
        None => Table::new(),
    };
    merge(&mut merged, file);
    let mut config: T = Value::Table(merged)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(format!("{}: {}", T::NAME, e.message())))?;
    if let Some(s) = ov.seed {
        config.set_seed(s);
    }
    if let Some(r) = &ov.data_root {
        config.set_data_root(r);
    }
    config.validate()?;
    Ok(Resolved { config, preset })
}

pub fn non_empty<V>(name: &str, v: &[V]) -> CliResult<()> {
    if v.is_empty() {
        return Err(CliError::Config(format!("'{name}' must not be empty")));
    }
    Ok(())
}

pub fn positive(name: &str, v: f64) -> CliResult<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(CliError::Config(format!("'{name}' must be positive, got {v}")));
    }
    Ok(())
}

pub fn at_least_one(name: &str, v: usize) -> CliResult<()> {
    if v == 0 {
        return Err(CliError::Config(format!("'{name}' must be >= 1")));
    }
    Ok(())
}

/// Sorted, deduplicated copy, so grids run and print in key order.
pub fn sorted<V: PartialOrd + Copy>(v: &[V]) -> Vec<V> {
    let mut out = v.to_vec();
    out.sort_by(|a, b| a.partial_cmp(b).expect("comparable grid values"));
    out.dedup_by(|a, b| a == b);
    out
}
