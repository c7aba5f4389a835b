use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{backward_and_step, Head, LossConfig, OptimizerState, SequenceModel, Target};
use crate::error::{Error, Result, ResultExt};
use crate::features::FeatureSequence;
use crate::labels::LabelBundle;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Schedule {
    pub epochs: usize,
    pub learning_rate: f64,
    pub shuffle_seed: u64,
}

impl Default for Schedule {
    fn default() -> Self {
        Self { epochs: 50, learning_rate: 1e-3, shuffle_seed: 0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    /// Mean pre-update loss of each epoch.
    pub epoch_losses: Vec<f64>,
}

impl Target {
    /// The supervision a model with `head` trains on.
    pub fn from_labels(head: Head, labels: &LabelBundle) -> Self {
        match head {
            Head::Binary => Target::Sequence(labels.binary.iter().map(|&b| b as f64).collect()),
            Head::Density => Target::Sequence(labels.density.clone()),
            Head::Count => Target::Count(labels.count as f64),
        }
    }
}

/// Per-sample Adam updates over `schedule.epochs` shuffled passes.
pub fn train(
    model: &mut SequenceModel,
    dataset: &[(&FeatureSequence, &LabelBundle)],
    schedule: &Schedule,
    loss_cfg: &LossConfig,
) -> Result<TrainingLog> {
    if dataset.is_empty() {
        return Err(Error::EmptyInput("training set"));
    }
    loss_cfg.validate()?;
    for (feats, labels) in dataset {
        if feats.dim() != model.config.input_dim {
            return Err(Error::DimensionMismatch { expected: model.config.input_dim, actual: feats.dim() });
        }
        if feats.len() != labels.len() {
            return Err(Error::LengthMismatch { expected: feats.len(), actual: labels.len() });
        }
    }
    let targets: Vec<Target> = dataset.iter().map(|(_, l)| Target::from_labels(model.config.head, l)).collect();
    let mut opt = OptimizerState::with_learning_rate(&model.params, schedule.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.shuffle_seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut log = TrainingLog::default();
    for epoch in 0..schedule.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &i in &order {
            total += backward_and_step(model, dataset[i].0, &targets[i], loss_cfg, &mut opt)
                .context_with(|| format!("epoch {epoch}, sample {i}"))?;
        }
        log.epoch_losses.push(total / dataset.len() as f64);
    }
    Ok(log)
}
