//! The TOML run configuration.

use std::path::{Path, PathBuf};

use evrep_core::{HamiltonianSpec, Method};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Twice the spin quantum number.
    pub two_s: u32,
    #[serde(default)]
    pub quorum: Option<QuorumOverrides>,
    #[serde(default)]
    pub hamiltonian: HamiltonianSpec,
    /// Required by `evolve` and `reconstruct`.
    #[serde(default)]
    pub initial_state: Option<InitialState>,
    /// Required by `evolve`.
    #[serde(default)]
    pub time: Option<TimeGrid>,
    #[serde(default)]
    pub method: MethodName,
    #[serde(default = "default_substeps")]
    pub rk4_substeps: usize,
    #[serde(default)]
    pub output: OutputSettings,
}

fn default_substeps() -> usize {
    Method::DEFAULT_SUBSTEPS
}

/// Either explicit angles or an exported quorum document, not both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuorumOverrides {
    #[serde(default)]
    pub cone_angles: Option<Vec<f64>>,
    #[serde(default)]
    pub azimuth_offsets: Option<Vec<f64>>,
    #[serde(default)]
    pub import: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    Coherent {
        theta: f64,
        phi: f64,
    },
    /// Eigenstate of `s_z` with eigenvalue `mu`.
    Basis {
        mu: f64,
    },
    MaximallyMixed,
    /// Row-major entries; `im` defaults to zero.
    Density {
        re: Vec<Vec<f64>>,
        #[serde(default)]
        im: Option<Vec<Vec<f64>>>,
    },
    Pvector {
        values: Vec<f64>,
    },
    RandomPure {
        seed: u64,
    },
    RandomMixed {
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum MethodName {
    #[default]
    #[serde(rename = "exact-expm")]
    ExactExpm,
    #[serde(rename = "rk4")]
    Rk4,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum Format {
    #[default]
    #[serde(rename = "csv")]
    Csv,
    #[serde(rename = "json-lines")]
    #[value(name = "json-lines")]
    JsonLines,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSettings {
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Option<Format>,
    #[serde(default)]
    pub oracle: bool,
}

impl RunConfig {
    pub fn method(&self) -> Method {
        match self.method {
            MethodName::ExactExpm => Method::ExactExpm,
            MethodName::Rk4 => Method::Rk4 {
                substeps: self.rk4_substeps,
            },
        }
    }

    pub fn initial_state(&self) -> Result<&InitialState, CliError> {
        self.initial_state
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [initial_state] section".into()))
    }

    pub fn time(&self) -> Result<&TimeGrid, CliError> {
        self.time
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [time] section".into()))
    }

    fn validate(&self) -> Result<(), CliError> {
        if let Some(time) = &self.time {
            if time.steps < 1 {
                return Err(CliError::Config("time.steps must be at least 1".into()));
            }
            if time.t_end.partial_cmp(&time.t_start) != Some(std::cmp::Ordering::Greater) {
                return Err(CliError::Config(format!(
                    "time.t_end ({}) must exceed time.t_start ({})",
                    time.t_end, time.t_start
                )));
            }
        }
        if self.rk4_substeps < 1 {
            return Err(CliError::Config("rk4_substeps must be at least 1".into()));
        }
        if let Some(q) = &self.quorum {
            let explicit = q.cone_angles.is_some() || q.azimuth_offsets.is_some();
            if explicit && q.import.is_some() {
                return Err(CliError::Config(
                    "quorum: give either cone_angles/azimuth_offsets or import, not both".into(),
                ));
            }
        }
        Ok(())
    }
}

/// A parsed configuration plus the digest of its exact bytes.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub sha256: String,
    /// Directory that relative paths inside the file resolve against.
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn from_str(text: &str, base_dir: &Path) -> Result<Self, CliError> {
        let config: RunConfig = toml::from_str(text)
            .map_err(|e| CliError::Config(format!("invalid configuration: {e}")))?;
        config.validate()?;
        Ok(LoadedConfig {
            config,
            sha256: hex(&Sha256::digest(text.as_bytes())),
            base_dir: base_dir.to_path_buf(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_str(&text, base)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
