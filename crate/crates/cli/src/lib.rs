//! Experiment runner behind the `cimx` binary.

pub mod commands;
pub mod output;

use std::fmt;
use std::path::Path;

use corinfomax::experiment::ExperimentConfig;
use corinfomax::Error;

/// Environment variable that overrides the config seed.
pub const SEED_ENV: &str = "CIMX_SEED";

/// A failure carrying its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub const SCHEMA: i32 = 2;
    pub const DIVERGENCE: i32 = 3;
    pub const CHECK: i32 = 1;
    pub const OTHER: i32 = 4;

    pub fn schema(message: impl Into<String>) -> Self {
        CliError {
            code: Self::SCHEMA,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Divergence { .. } => Self::DIVERGENCE,
            Error::InvalidArgument(_) => Self::SCHEMA,
            _ => Self::OTHER,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError {
            code: Self::OTHER,
            message: format!("io: {e}"),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError {
            code: Self::OTHER,
            message: format!("csv: {e}"),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Parses and validates a config. Schema errors name the offending field.
pub fn parse_config(text: &str) -> CliResult<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        if path == "." || path == "?" {
            CliError::schema(format!("config: {}", e.inner()))
        } else {
            CliError::schema(format!("config field `{path}`: {}", e.inner()))
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> CliResult<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError {
        code: CliError::SCHEMA,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    parse_config(&text)
}

/// Seed precedence: explicit flag, then `CIMX_SEED`, then the config.
pub fn resolve_seed(config_seed: u64, flag: Option<u64>, env: Option<&str>) -> CliResult<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match env {
        Some(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::schema(format!("{SEED_ENV}=`{v}` is not an unsigned integer"))),
        None => Ok(config_seed),
    }
}
