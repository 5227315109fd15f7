use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{SplitSpec, SynthConfig, TextNormalizer};
use crate::error::{Error, Result};
use crate::training::TrainConfig;

fn default_threads() -> usize {
    1
}
fn default_dim() -> usize {
    32
}
fn default_top_k() -> usize {
    3
}

/// Stop-word and traditional-to-simplified tables; the bundled lists are
/// used for any path left unset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TextConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stopwords: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t2s: Option<PathBuf>,
}

impl TextConfig {
    pub fn normalizer(&self) -> Result<TextNormalizer> {
        TextNormalizer::from_files(self.stopwords.as_deref(), self.t2s.as_deref())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbedConfig {
    #[serde(default = "default_dim")]
    pub dim: usize,
    /// Parameter of the token hash, independent of the root seed.
    #[serde(default)]
    pub hash_seed: u64,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        Self {
            dim: default_dim(),
            hash_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictConfig {
    /// Highest-weighted tweet ordinals reported per user.
    #[serde(default = "default_top_k")]
    pub top_k: usize,
}

impl Default for PredictConfig {
    fn default() -> Self {
        Self { top_k: default_top_k() }
    }
}

/// Everything a run needs. The root `seed` drives every seeded stage; the
/// seeds inside sections are overwritten with it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_threads")]
    pub threads: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub synth: SynthConfig,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default)]
    pub text: TextConfig,
    #[serde(default)]
    pub embed: EmbedConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub predict: PredictConfig,
}

impl Default for CliConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            threads: default_threads(),
            out: None,
            synth: SynthConfig::default(),
            split: SplitSpec::default(),
            text: TextConfig::default(),
            embed: EmbedConfig::default(),
            train: TrainConfig::default(),
            predict: PredictConfig::default(),
        }
    }
}

impl CliConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Copies the root seed into every section and checks all values.
    pub fn resolve(mut self) -> Result<Self> {
        self.synth.seed = self.seed;
        self.split.seed = self.seed;
        self.train.seed = self.seed;
        self.train.autoencoder.seed = self.seed;
        if self.threads == 0 {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        if self.embed.dim == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        self.synth.validate()?;
        self.split.validate()?;
        self.train.validate()?;
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::training::Pooling;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(CliConfig::from_toml("").unwrap(), CliConfig::default());
    }

    #[test]
    fn partial_sections_and_unknown_keys() {
        let cfg = CliConfig::from_toml("seed = 4\n[train.head]\npooling = \"mean\"\n[synth]\nn_users = 20\n").unwrap();
        assert_eq!(cfg.seed, 4);
        assert_eq!(cfg.train.head.pooling, Pooling::Mean);
        assert_eq!(cfg.synth.n_users, 20);
        assert_eq!(cfg.synth.dim, SynthConfig::default().dim);
        assert!(CliConfig::from_toml("sed = 4").is_err());
        assert!(CliConfig::from_toml("[train]\nlr = 1").is_err());
        assert!(CliConfig::from_toml("[train.autoencoder]\nseed = 1").is_err());
    }

    #[test]
    fn effective_config_round_trips() {
        let cfg = CliConfig {
            seed: 11,
            out: Some("runs/x".into()),
            ..CliConfig::default()
        }
        .resolve()
        .unwrap();
        let text = cfg.to_toml().unwrap();
        let back = CliConfig::from_toml(&text).unwrap().resolve().unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_toml().unwrap(), text);
    }

    #[test]
    fn resolve_rejects_bad_values() {
        let mut cfg = CliConfig::default();
        cfg.train.threshold = 0.0;
        assert!(cfg.resolve().is_err());
        let cfg = CliConfig { threads: 0, ..CliConfig::default() };
        assert!(cfg.resolve().is_err());
    }
}
