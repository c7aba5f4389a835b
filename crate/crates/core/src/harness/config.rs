use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::decode::DecodeParams;
use crate::error::{Error, Result};
use crate::features::{self, AngleSpec, FeatureSequence, FeatureVariant};
use crate::labels::DEFAULT_SIGMA_FRACTION;
use crate::neural::{Head, LossConfig, ModelConfig, Schedule};
use crate::skeleton::{normalize, NormalizationSpec, SkeletonSequence};

pub const RUN_CONFIG_VERSION: u32 = 1;

/// Everything between a raw skeleton and the model input, plus the label
/// and decoder settings. Stored in checkpoints so inference reproduces it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Pipeline {
    pub feature_variant: FeatureVariant,
    /// `None` selects the bundled 43-angle spec.
    pub angle_spec: Option<AngleSpec>,
    pub normalization: NormalizationSpec,
    pub standardize: bool,
    pub sigma_fraction: f64,
    pub decode: DecodeParams,
}

impl Default for Pipeline {
    fn default() -> Self {
        Self {
            feature_variant: FeatureVariant::Raw,
            angle_spec: None,
            normalization: NormalizationSpec::default(),
            standardize: true,
            sigma_fraction: DEFAULT_SIGMA_FRACTION,
            decode: DecodeParams::default(),
        }
    }
}

impl Pipeline {
    pub fn angle_spec(&self) -> AngleSpec {
        self.angle_spec.clone().unwrap_or_default()
    }

    /// Normalized skeleton to (unstandardized) features.
    pub fn features(&self, seq: &SkeletonSequence) -> Result<FeatureSequence> {
        let seq = normalize(seq, &self.normalization)?;
        features::extract(&seq, self.feature_variant, &self.angle_spec())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSettings {
    /// Defaults to twice the feature dimension.
    pub hidden_dim: Option<usize>,
    pub lstm_layers: usize,
    pub use_conv: bool,
    pub conv_kernel: usize,
    /// Defaults to the hidden dimension.
    pub conv_channels: Option<usize>,
    pub seed: u64,
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self { hidden_dim: None, lstm_layers: 1, use_conv: true, conv_kernel: 5, conv_channels: None, seed: 0 }
    }
}

impl ModelSettings {
    pub fn build(&self, input_dim: usize, head: Head) -> ModelConfig {
        let mut cfg = ModelConfig::new(input_dim, head);
        if let Some(h) = self.hidden_dim {
            cfg.hidden_dim = h;
        }
        cfg.conv_channels = self.conv_channels.unwrap_or(cfg.hidden_dim);
        cfg.lstm_layers = self.lstm_layers;
        cfg.use_conv = self.use_conv;
        cfg.conv_kernel = self.conv_kernel;
        cfg.seed = self.seed;
        cfg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    /// One model over all exercises.
    General,
    /// Independent cross-validation per exercise.
    ExerciseSpecific,
}

/// The `run.json` schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub version: u32,
    pub dataset_path: PathBuf,
    pub output_dir: PathBuf,
    pub head: Head,
    #[serde(flatten)]
    pub pipeline: Pipeline,
    pub model: ModelSettings,
    pub loss: LossConfig,
    pub schedule: Schedule,
    pub folds: usize,
    pub scope: Scope,
    /// Keep each subject's samples inside a single fold.
    pub subject_disjoint: bool,
    pub seed: u64,
    /// Worker threads for fold-level parallelism; `None` uses all cores.
    pub threads: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            version: RUN_CONFIG_VERSION,
            dataset_path: PathBuf::from("data"),
            output_dir: PathBuf::from("runs"),
            head: Head::Density,
            pipeline: Pipeline::default(),
            model: ModelSettings::default(),
            loss: LossConfig::default(),
            schedule: Schedule::default(),
            folds: 5,
            scope: Scope::General,
            subject_disjoint: false,
            seed: 0,
            threads: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        if cfg.version != RUN_CONFIG_VERSION {
            return Err(Error::UnsupportedVersion(cfg.version));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        // relative paths in a config file are relative to the file
        if let Some(base) = path.parent() {
            if cfg.dataset_path.is_relative() {
                cfg.dataset_path = base.join(&cfg.dataset_path);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::InvalidConfig(format!("folds = {}, need at least 2", self.folds)));
        }
        if !(1..=3).contains(&self.model.lstm_layers) {
            return Err(Error::InvalidConfig(format!("lstm_layers {}", self.model.lstm_layers)));
        }
        self.loss.validate()?;
        self.pipeline.decode.validate()?;
        if !(self.pipeline.sigma_fraction > 0.0) {
            return Err(Error::InvalidConfig(format!("sigma_fraction {}", self.pipeline.sigma_fraction)));
        }
        Ok(())
    }

    /// Short stable digest naming the run directory. Output location and
    /// thread count do not affect results and are excluded.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        canonical.threads = None;
        let json = serde_json::to_string(&canonical).expect("config serializes");
        hex::encode(&Sha256::digest(json.as_bytes())[..6])
    }

    pub fn run_dir(&self) -> PathBuf {
        self.output_dir.join(self.hash())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_from_minimal_json() {
        let cfg = ExperimentConfig::from_json(r#"{"version": 1, "dataset_path": "d", "head": "binary"}"#).unwrap();
        assert_eq!(cfg.head, Head::Binary);
        assert_eq!(cfg.folds, 5);
        assert_eq!(cfg.pipeline.feature_variant, FeatureVariant::Raw);
        cfg.validate().unwrap();
        assert!(ExperimentConfig::from_json(r#"{"version": 7}"#).is_err());
    }

    #[test]
    fn hash_ignores_output_location() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig { output_dir: "elsewhere".into(), threads: Some(3), ..a.clone() };
        assert_eq!(a.hash(), b.hash());
        let c = ExperimentConfig { seed: 1, ..a.clone() };
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn model_settings_follow_hidden_rule() {
        let m = ModelSettings::default().build(43, Head::Density);
        assert_eq!((m.hidden_dim, m.conv_channels), (86, 86));
        let m = ModelSettings { hidden_dim: Some(10), ..Default::default() }.build(43, Head::Density);
        assert_eq!((m.hidden_dim, m.conv_channels), (10, 10));
    }
}
