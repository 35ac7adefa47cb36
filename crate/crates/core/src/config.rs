//! TOML config file covering the scenario, training, baseline, and
//! experiment sections, with dotted `key=value` overrides on top.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::BaselineConfig;
use crate::channel::ScenarioConfig;
use crate::error::{Error, Result};
use crate::experiments::ExperimentSpec;
use crate::training::TrainConfig;

/// Full config file. Every section and every field is optional; defaults
/// reproduce the reference scenario (M = K = 4, 100 m cell, the standard
/// power and error-ratio sets).
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub scenario: ScenarioConfig,
    pub train: TrainConfig,
    pub baselines: BaselineConfig,
    pub experiment: ExperimentSpec,
}

impl FileConfig {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.train.validate()?;
        self.baselines.validate()?;
        self.experiment.validate()
    }
}

fn parse_toml(text: &str) -> Result<toml::Table> {
    text.parse::<toml::Table>()
        .map_err(|e| Error::Config(format!("TOML parse error: {e}")))
}

/// Apply one `section.key=value` override onto the raw TOML table. The value
/// is parsed as TOML (so numbers, booleans, and arrays work) and falls back
/// to a plain string.
fn apply_override(table: &mut toml::Table, entry: &str) -> Result<()> {
    let (path, raw_value) = entry.split_once('=').ok_or_else(|| {
        Error::Config(format!("override \"{entry}\" is not of the form key=value"))
    })?;
    let value = match format!("v = {raw_value}").parse::<toml::Table>() {
        Ok(t) => t["v"].clone(),
        Err(_) => toml::Value::String(raw_value.to_string()),
    };

    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.is_empty() || keys.iter().any(|k| k.is_empty()) {
        return Err(Error::Config(format!("bad override path \"{path}\"")));
    }
    let mut cursor = table;
    for key in &keys[..keys.len() - 1] {
        let next = cursor
            .entry(key.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cursor = next.as_table_mut().ok_or_else(|| {
            Error::Config(format!("override path \"{path}\" crosses a non-table"))
        })?;
    }
    cursor.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

/// Load a config file (or defaults when no path is given), apply overrides,
/// then apply the seed flag to both the scenario and training seeds.
pub fn load_config(
    path: Option<&Path>,
    overrides: &[String],
    seed: Option<u64>,
) -> Result<FileConfig> {
    let mut table = match path {
        Some(p) => parse_toml(&std::fs::read_to_string(p)?)?,
        None => toml::Table::new(),
    };
    for entry in overrides {
        apply_override(&mut table, entry)?;
    }
    let mut cfg: FileConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e| Error::Config(format!("config error: {e}")))?;
    if let Some(s) = seed {
        cfg.scenario.seed = s;
        cfg.train.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}
