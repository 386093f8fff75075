//! Optional TOML config file. Keys mirror the long flag names with
//! underscores; a flag given on the command line wins over the file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub scenario: Option<PathBuf>,
    pub evm: Option<f64>,
    pub tol: Option<f64>,
    pub step: Option<f64>,
    pub profiles: Option<ProfileSpec>,
    pub strict_pareto: Option<bool>,
    pub grid_cap: Option<usize>,

    pub kind: Option<String>,
    pub kt: Option<usize>,
    pub n: Option<usize>,
    pub users: Option<usize>,
    pub snr: Option<f64>,
    pub metric: Option<String>,

    pub boundary: Option<PathBuf>,
    pub samples: Option<usize>,
    pub power_grid: Option<usize>,
    pub oracle_mode: Option<String>,
    pub dominance_tol: Option<f64>,
    pub front_tol: Option<f64>,
    pub round_trips: Option<usize>,
}

/// Either a profile count for the uniform grid or an explicit list of weights.
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum ProfileSpec {
    Count(usize),
    List(Vec<Vec<f64>>),
}

impl ProfileSpec {
    /// `101` or `0.2,0.8;0.5,0.5`.
    pub fn parse(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if let Ok(n) = s.parse::<usize>() {
            return Ok(ProfileSpec::Count(n));
        }
        s.split(';')
            .filter(|v| !v.trim().is_empty())
            .map(|v| {
                v.split(',')
                    .map(|x| x.trim().parse::<f64>().map_err(|e| format!("bad weight {x:?}: {e}")))
                    .collect()
            })
            .collect::<Result<Vec<_>, _>>()
            .map(ProfileSpec::List)
    }
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else { return Ok(FileConfig::default()) };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))
    }
}
