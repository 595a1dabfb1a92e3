//! JSON config files and the flag-over-file merge.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use dse_core::learn::EngineMode;
use dse_core::solver::{Backend, SolverConfig};

use crate::CliError;

/// Every knob a config file may set; command-line flags win over these.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub mode: Option<EngineMode>,
    pub heuristic: Option<String>,
    pub heuristics: Option<Vec<String>>,
    pub budget: Option<u64>,
    pub seconds: Option<f64>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub log: Option<PathBuf>,
    pub solver: Option<String>,
    pub domain_bits: Option<u8>,
    pub step_limit: Option<u64>,
    pub parallelism: Option<usize>,
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub check_trials: Option<usize>,
    pub max_iterations: Option<usize>,
    pub random_initial: Option<bool>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else { return Ok(FileConfig::default()) };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config `{}`: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("bad config `{}`: {e}", path.display())))
    }
}

pub const SOLVER_ENV: &str = "DSE_SOLVER_CMD";
const DEFAULT_SOLVER_CMD: &str = "z3 -in";

pub fn solver_config(name: &str, domain_bits: u8) -> Result<SolverConfig, CliError> {
    if !(1..=32).contains(&domain_bits) {
        return Err(CliError::Usage(format!("domain bits must be 1..=32, got {domain_bits}")));
    }
    let backend = match name {
        "builtin" => Backend::Builtin { domain_bits },
        "external" => {
            let command = std::env::var(SOLVER_ENV).unwrap_or_else(|_| DEFAULT_SOLVER_CMD.to_string());
            Backend::External { command }
        }
        other => return Err(CliError::Usage(format!("unknown solver `{other}` (expected builtin or external)"))),
    };
    Ok(SolverConfig { backend, ..SolverConfig::default() })
}
