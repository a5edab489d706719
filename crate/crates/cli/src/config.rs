//! Run configuration files (TOML) and their content hash.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use dqlab::diagnostics::DiagnoseOptions;
use dqlab::envs::Mdp;
use dqlab::trainer::{NetworkConfig, PolicyConfig, ReplayConfig, RunConfig, StepSchedule, TrainConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::InputError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSection {
    /// MDP file, relative to the config file's directory.
    pub path: PathBuf,
    /// Pins the start state instead of the file's initial distribution.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<usize>,
}

/// Contents of a run config file. Sections mirror [`TrainConfig`] plus the
/// environment and optional diagnose settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    pub env: EnvSection,
    pub network: NetworkConfig,
    pub schedule: StepSchedule,
    pub policy: PolicyConfig,
    #[serde(default = "ReplayConfig::disabled")]
    pub replay: ReplayConfig,
    pub run: RunConfig,
    #[serde(default)]
    pub diagnose: DiagnoseOptions,
}

impl RunFile {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| InputError::new(format!("{origin}: {e}")).into())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            network: self.network.clone(),
            schedule: self.schedule,
            policy: self.policy,
            replay: self.replay,
            run: self.run.clone(),
        }
    }
}

/// A parsed config together with the MDP it points at.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub file: RunFile,
    pub mdp: Mdp,
    pub stem: String,
}

impl LoadedConfig {
    pub fn load(path: &Path, seed: Option<u64>) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| InputError::new(format!("cannot read config {}: {e}", path.display())))?;
        let mut file = RunFile::parse(&text, &path.display().to_string())?;
        if let Some(seed) = seed {
            file.run.seed = seed;
        }
        let base = path.parent().unwrap_or(Path::new("."));
        let mdp_path = base.join(&file.env.path);
        let mut mdp = Mdp::load(&mdp_path).map_err(|e| InputError::new(format!("env.path: {e}")))?;
        if let Some(x) = file.env.initial_state {
            mdp = mdp.with_initial_state(x).map_err(|e| InputError::new(format!("env.initial_state: {e}")))?;
        }
        file.train_config().validate(&mdp).map_err(InputError::from_core)?;
        file.diagnose.validate().map_err(InputError::from_core)?;
        let stem = path.file_stem().map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned());
        Ok(Self { file, mdp, stem })
    }

    pub fn hash(&self) -> String {
        config_hash(&self.file, &self.mdp)
    }
}

/// SHA-256 over the canonical JSON of the effective config and the MDP it
/// resolves to. Field order is fixed by the types, so reformatting or
/// reordering the TOML does not change the hash.
pub fn config_hash(file: &RunFile, mdp: &Mdp) -> String {
    let mut text = serde_json::to_string(file).expect("config serializes");
    text.push('\n');
    text.push_str(&mdp.to_json_string());
    hex(&Sha256::digest(text.as_bytes()))
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Reads just the `[diagnose]` table of a TOML file. Other top-level tables
/// of a run config are allowed and ignored.
pub fn load_diagnose_options(path: &Path) -> Result<DiagnoseOptions> {
    const RUN_TABLES: [&str; 6] = ["env", "network", "schedule", "policy", "replay", "run"];
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut table: toml::Table =
        toml::from_str(&text).map_err(|e| InputError::new(format!("{}: {e}", path.display())))?;
    if let Some(key) = table.keys().find(|k| *k != "diagnose" && !RUN_TABLES.contains(&k.as_str())) {
        return Err(InputError::new(format!("{}: unknown top-level key `{key}`", path.display())).into());
    }
    let options: DiagnoseOptions = match table.remove("diagnose") {
        Some(value) => value
            .try_into()
            .map_err(|e| InputError::new(format!("{}: diagnose: {e}", path.display())))?,
        None => DiagnoseOptions::default(),
    };
    options.validate().map_err(InputError::from_core)?;
    Ok(options)
}
