//! Effective configuration: command-line flags layered over an optional TOML file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::CliError;

/// Keys accepted in the config file. Every field is optional; flags win.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub endpoints: Option<Vec<String>>,
    pub workers: Option<usize>,
    pub shots: Option<u64>,
    pub exact: Option<bool>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub json: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// Settings shared by every subcommand after merging.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CliConfig {
    pub subcommand: String,
    pub config_file: Option<PathBuf>,
    pub endpoints: Vec<String>,
    pub workers: Option<usize>,
    /// `None` selects exact mode.
    pub shots: Option<u64>,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub json: bool,
}

/// Flag values as parsed; `None` means "not given on the command line".
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub endpoints: Option<Vec<String>>,
    pub workers: Option<usize>,
    pub shots: Option<u64>,
    pub exact: bool,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub json: bool,
}

impl CliConfig {
    /// `default_shots` is the subcommand's mode when neither flags nor file
    /// choose one (`None` for exact).
    pub fn merge(
        subcommand: &str,
        config_file: Option<PathBuf>,
        file: FileConfig,
        flags: Overrides,
        default_shots: Option<u64>,
    ) -> Result<Self, CliError> {
        let shots = if flags.exact {
            None
        } else if let Some(s) = flags.shots {
            Some(s)
        } else {
            match (file.exact, file.shots) {
                (Some(true), Some(_)) => {
                    return Err(CliError::Config("config sets both exact and shots".into()))
                }
                (Some(true), None) => None,
                (_, Some(s)) => Some(s),
                (Some(false), None) => Some(default_shots.unwrap_or(1024)),
                (None, None) => default_shots,
            }
        };
        if shots == Some(0) {
            return Err(CliError::Config("shots must be positive".into()));
        }
        let workers = flags.workers.or(file.workers);
        if workers == Some(0) {
            return Err(CliError::Config("workers must be positive".into()));
        }
        let endpoints: Vec<String> = flags
            .endpoints
            .or(file.endpoints)
            .unwrap_or_default()
            .into_iter()
            .map(|e| e.trim().to_string())
            .filter(|e| !e.is_empty())
            .collect();
        Ok(CliConfig {
            subcommand: subcommand.to_string(),
            config_file,
            endpoints,
            workers,
            shots,
            seed: flags.seed.or(file.seed).unwrap_or(0),
            output: flags.output.or(file.output),
            json: flags.json || file.json.unwrap_or(false),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
