//! TOML configuration file. Each subcommand reads its own table, with keys
//! named like the long flags (`max-iter` or `max_iter`).

use std::path::{Path, PathBuf};

use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default, alias = "params_table", rename = "params-table")]
    pub params_table: ParamsTableSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FitSection {
    pub data: Option<PathBuf>,
    pub components: Option<String>,
    pub factors: Option<String>,
    pub model: Option<String>,
    pub tol: Option<f64>,
    #[serde(alias = "max_iter")]
    pub max_iter: Option<usize>,
    #[serde(alias = "min_dof")]
    pub min_dof: Option<f64>,
    #[serde(alias = "max_dof")]
    pub max_dof: Option<f64>,
    pub seed: Option<u64>,
    pub init: Option<String>,
    pub labels: Option<PathBuf>,
    pub out: Option<PathBuf>,
    #[serde(alias = "grid_out")]
    pub grid_out: Option<PathBuf>,
    #[serde(alias = "labels_out")]
    pub labels_out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub restarts: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SimulateSection {
    pub spec: Option<PathBuf>,
    #[serde(alias = "paper_4_2")]
    pub paper_4_2: Option<bool>,
    pub seed: Option<u64>,
    #[serde(alias = "out_prefix")]
    pub out_prefix: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub pred: Option<PathBuf>,
    #[serde(rename = "true")]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ParamsTableSection {
    #[serde(alias = "p_range")]
    pub p_range: Option<String>,
    pub q: Option<usize>,
    pub g: Option<usize>,
    pub models: Option<String>,
    pub out: Option<PathBuf>,
}

pub fn load(path: Option<&Path>) -> Result<ConfigFile, String> {
    let Some(path) = path else {
        return Ok(ConfigFile::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    toml::from_str(&text).map_err(|e| format!("invalid config {}: {e}", path.display()))
}
