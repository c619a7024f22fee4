//! Run configuration, read from and written to TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fgfs::FgfsConfig;
use crate::models::{MlpConfig, ModelConfig, ModelKind, QuantumConfig, RffConfig, SirenConfig};
use crate::train::TrainConfig;

/// Image source keyword selecting the built-in phantom.
pub const PHANTOM: &str = "phantom";
/// Circuit keyword selecting the generated default circuit.
pub const DEFAULT_CIRCUIT: &str = "default";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelKind,
    /// Path to a PGM/PNG image, or `phantom`.
    pub image: String,
    /// Side length the image is downsampled to.
    pub resolution: usize,
    /// Path to a circuit file, or `default`.
    pub circuit: String,
    pub seed: u64,
    pub restarts: usize,
    pub output_dir: PathBuf,
    pub train: TrainConfig,
    pub fgfs: FgfsConfig,
    pub mlp: MlpConfig,
    pub rff: RffConfig,
    pub siren: SirenConfig,
    pub quantum: QuantumConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelKind::Qfgn,
            image: PHANTOM.into(),
            resolution: 32,
            circuit: DEFAULT_CIRCUIT.into(),
            seed: 0,
            restarts: 1,
            output_dir: PathBuf::from("runs"),
            train: TrainConfig::default(),
            fgfs: FgfsConfig::default(),
            mlp: MlpConfig::default(),
            rff: RffConfig::default(),
            siren: SirenConfig::default(),
            quantum: QuantumConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution == 0 {
            return Err(Error::Config("resolution must be at least 1".into()));
        }
        if self.restarts == 0 {
            return Err(Error::Config("restarts must be at least 1".into()));
        }
        // TOML integers are signed 64-bit; keep every restart seed representable
        let last = self.seed.checked_add(self.restarts as u64 - 1);
        if last.is_none_or(|s| s > i64::MAX as u64) {
            return Err(Error::Config(format!(
                "seed {} with {} restarts exceeds {}",
                self.seed,
                self.restarts,
                i64::MAX
            )));
        }
        if self.quantum.shots > i64::MAX as u64 {
            return Err(Error::Config("quantum.shots too large".into()));
        }
        if self.mlp.width == 0 || self.mlp.width > 4096 || self.mlp.hidden_layers > 1024 {
            return Err(Error::Config(format!(
                "mlp width must lie in 1..=4096 and hidden_layers in 0..=1024, got {} and {}",
                self.mlp.width, self.mlp.hidden_layers
            )));
        }
        if self.rff.frequencies == 0 || self.rff.frequencies > 4096 {
            return Err(Error::Config(format!("rff.frequencies must lie in 1..=4096, got {}", self.rff.frequencies)));
        }
        if self.resolution > crate::imaging::MAX_SIDE {
            return Err(Error::Config(format!("resolution exceeds {}", crate::imaging::MAX_SIDE)));
        }
        self.train.validate()?;
        self.fgfs.validate()?;
        Ok(())
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            mlp: self.mlp.clone(),
            rff: self.rff.clone(),
            siren: self.siren.clone(),
            fgfs: self.fgfs.clone(),
            quantum: self.quantum.clone(),
        }
    }
}
