use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use shapx_core::{Method, ShapError};

use crate::error::{CliError, CliResult};

/// Attribution written by `exact` and `estimate`.
#[derive(Serialize)]
pub struct AttributionFile<'a> {
    pub phi: &'a [f64],
    pub method: Method,
    pub d: usize,
    pub v_empty: f64,
    pub v_full: f64,
    pub seed: u64,
    pub elapsed_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples_used: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimator: Option<EstimatorEcho>,
    pub game: String,
    pub efficiency_gap: f64,
}

#[derive(Serialize)]
pub struct EstimatorEcho {
    pub name: String,
    pub method: String,
    pub samples: usize,
    pub paired: bool,
    pub seed: u64,
}

pub fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(format!("json encoding: {e}")))?;
    text.push('\n');
    Ok(text)
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| ShapError::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| ShapError::io(path, e).into())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    write_text(path, &to_json(value)?)
}

/// `out.json` → `out.config.toml`.
pub fn config_path_for(output: &Path) -> PathBuf {
    output.with_extension("config.toml")
}

pub fn out_dir(dir: &Path) -> CliResult<&Path> {
    fs::create_dir_all(dir).map_err(|e| ShapError::io(dir, e))?;
    Ok(dir)
}
