use std::fs;
use std::path::Path;

use clap::Args;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::args::SEED_ENV;
use crate::error::{CliError, CliResult};

const COMMANDS: [&str; 5] = ["exact", "estimate", "train", "eval", "bench"];

/// Command arguments whose unset fields have defaults.
pub trait Resolve: Args + Serialize + DeserializeOwned {
    fn fill_defaults(&mut self) -> CliResult<()>;
}

pub fn load(path: &Path) -> CliResult<toml::Table> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| CliError::Usage(format!("config {} is not valid TOML: {e}", path.display())))?;
    for (key, value) in &table {
        if !COMMANDS.contains(&key.as_str()) || !value.is_table() {
            return Err(CliError::Usage(format!(
                "config {}: unexpected entry {key:?}; expected tables named {}",
                path.display(),
                COMMANDS.join(", ")
            )));
        }
    }
    Ok(table)
}

/// Merges flags over the command's config table, then fills defaults.
pub fn resolve<A: Resolve>(flags: A, file: Option<&toml::Table>, command: &str) -> CliResult<A> {
    let mut merged = match file.and_then(|f| f.get(command)) {
        Some(toml::Value::Table(t)) => t.clone(),
        _ => toml::Table::new(),
    };
    let known: Vec<String> = A::augment_args(clap::Command::new("args"))
        .get_arguments()
        .map(|a| a.get_id().to_string())
        .collect();
    if let Some(key) = merged.keys().find(|k| !known.contains(k)) {
        return Err(CliError::Usage(format!("config table [{command}] has unknown key {key:?}")));
    }
    let given = toml::Table::try_from(&flags).map_err(|e| CliError::Internal(format!("flag encoding: {e}")))?;
    merged.extend(given);
    let mut args: A = merged
        .try_into()
        .map_err(|e| CliError::Usage(format!("config table [{command}]: {e}")))?;
    args.fill_defaults()?;
    Ok(args)
}

/// The resolved arguments as a config file that reproduces the run.
pub fn render<A: Serialize>(command: &str, args: &A) -> CliResult<String> {
    let mut table = toml::Table::new();
    let body = toml::Table::try_from(args).map_err(|e| CliError::Internal(format!("config encoding: {e}")))?;
    table.insert(command.to_owned(), toml::Value::Table(body));
    toml::to_string(&table).map_err(|e| CliError::Internal(format!("config encoding: {e}")))
}

/// Seed precedence after flags and file: `SHAPX_SEED`, then 0.
pub fn seed_or_env(seed: Option<u64>) -> CliResult<u64> {
    let seed = match seed {
        Some(s) => s,
        None => match std::env::var(SEED_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("{SEED_ENV}={v:?} is not an unsigned integer")))?,
            Err(_) => 0,
        },
    };
    if seed > i64::MAX as u64 {
        return Err(CliError::Usage(format!("seed {seed} exceeds {}", i64::MAX)));
    }
    Ok(seed)
}
