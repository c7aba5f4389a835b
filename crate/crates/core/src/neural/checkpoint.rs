use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelConfig, NamedTensor, Parameters, SequenceModel};
use crate::error::{Error, Result};
use crate::features::StandardizationStats;
use crate::harness::Pipeline;

pub const CHECKPOINT_VERSION: u32 = 1;

/// Self-describing JSON checkpoint: model config, every parameter tensor,
/// and the preprocessing needed to feed the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub model: ModelConfig,
    pub tensors: Vec<NamedTensor>,
    pub standardization: Option<StandardizationStats>,
    pub pipeline: Option<Pipeline>,
}

impl Checkpoint {
    pub fn new(model: &SequenceModel, standardization: Option<StandardizationStats>, pipeline: Option<Pipeline>) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            model: model.config.clone(),
            tensors: model.params.to_named(),
            standardization,
            pipeline,
        }
    }

    pub fn to_model(&self) -> Result<SequenceModel> {
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::UnsupportedVersion(self.version));
        }
        self.model.validate()?;
        let mut params = Parameters::zeros(&self.model);
        let shapes = params.shapes();
        let mut slots = params.tensors_mut();
        if slots.len() != self.tensors.len() {
            return Err(Error::InvalidConfig(format!(
                "checkpoint has {} tensors, config implies {}",
                self.tensors.len(),
                slots.len()
            )));
        }
        for (((name, slot), shape), saved) in slots.iter_mut().zip(&shapes).zip(&self.tensors) {
            if *name != saved.name || *shape != saved.shape || slot.len() != saved.data.len() {
                return Err(Error::InvalidConfig(format!(
                    "tensor `{}` {:?} does not match expected `{}` {:?}",
                    saved.name, saved.shape, name, shape
                )));
            }
            if saved.data.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("tensor `{name}`")));
            }
            slot.copy_from_slice(&saved.data);
        }
        drop(slots);
        Ok(SequenceModel { config: self.model.clone(), params })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ckpt: Checkpoint = serde_json::from_str(&text)?;
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::UnsupportedVersion(ckpt.version));
        }
        Ok(ckpt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::Head;

    #[test]
    fn json_round_trip_is_exact() {
        let cfg = ModelConfig { lstm_layers: 2, seed: 9, ..ModelConfig::new(3, Head::Binary) };
        let model = SequenceModel::new(cfg).unwrap();
        let stats = StandardizationStats { mean: vec![0.1, 1.0 / 3.0, -2.5e-7], std: vec![1.0, 0.7, 3.3] };
        let ckpt = Checkpoint::new(&model, Some(stats), None);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        ckpt.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back, ckpt);
        assert_eq!(back.to_model().unwrap(), model);
    }

    #[test]
    fn rejects_wrong_version_and_shapes() {
        let model = SequenceModel::new(ModelConfig::new(3, Head::Density)).unwrap();
        let mut ckpt = Checkpoint::new(&model, None, None);
        ckpt.version = 99;
        assert!(matches!(ckpt.to_model(), Err(Error::UnsupportedVersion(99))));
        ckpt.version = CHECKPOINT_VERSION;
        ckpt.tensors[0].shape = vec![1, 1];
        assert!(ckpt.to_model().is_err());
    }
}
