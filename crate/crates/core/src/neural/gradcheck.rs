//! Analytic gradients versus central finite differences.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{compute_gradients, Head, LossConfig, ModelConfig, SequenceModel, Target};
use crate::error::Result;
use crate::features::{FeatureSequence, FeatureVariant};

pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorCheck {
    pub name: String,
    /// `max|analytic - numeric| / max(max|analytic|, max|numeric|)`, 0 when both vanish.
    pub max_rel_error: f64,
    pub analytic_max_abs: f64,
    pub numeric_max_abs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub head: Head,
    pub lstm_layers: usize,
    pub use_conv: bool,
    pub sequence_length: usize,
    pub tensors: Vec<TensorCheck>,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Random inputs and targets for a gradient check, derived from `config.seed`.
fn random_sample(config: &ModelConfig, t_len: usize) -> (FeatureSequence, Target) {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
    let values = Array2::from_shape_simple_fn((t_len, config.input_dim), || rng.sample::<f64, _>(StandardNormal));
    let target = match config.head {
        Head::Density => Target::Sequence((0..t_len).map(|_| rng.random_range(0.0..0.3)).collect()),
        Head::Binary => Target::Sequence((0..t_len).map(|_| f64::from(rng.random_bool(0.5) as u8)).collect()),
        Head::Count => Target::Count(rng.random_range(0..5) as f64),
    };
    (FeatureSequence::new(values, FeatureVariant::Raw), target)
}

/// Compares the analytic gradient of every parameter against central
/// differences with step [`FD_STEP`] on a random sequence of length `t_len`.
pub fn grad_check(config: &ModelConfig, t_len: usize, tolerance: f64) -> Result<GradCheckReport> {
    let model = SequenceModel::new(config.clone())?;
    let (feats, target) = random_sample(config, t_len);
    let loss_cfg = LossConfig::default();
    let (_, analytic) = compute_gradients(&model, &feats, &target, &loss_cfg)?;

    let mut probe = model.clone();
    let mut tensors = Vec::new();
    let names: Vec<String> = analytic.tensors().into_iter().map(|(n, _)| n).collect();
    for (ti, name) in names.into_iter().enumerate() {
        let grad = analytic.tensors()[ti].1.to_vec();
        let mut numeric = vec![0.0; grad.len()];
        for (i, slot) in numeric.iter_mut().enumerate() {
            let orig = probe.params.tensors()[ti].1[i];
            probe.params.tensors_mut()[ti].1[i] = orig + FD_STEP;
            let up = probe.loss(&feats, &target, &loss_cfg)?;
            probe.params.tensors_mut()[ti].1[i] = orig - FD_STEP;
            let down = probe.loss(&feats, &target, &loss_cfg)?;
            probe.params.tensors_mut()[ti].1[i] = orig;
            *slot = (up - down) / (2.0 * FD_STEP);
        }
        let max_abs = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let (a_max, n_max) = (max_abs(&grad), max_abs(&numeric));
        let diff = grad.iter().zip(&numeric).fold(0.0f64, |m, (a, n)| m.max((a - n).abs()));
        let scale = a_max.max(n_max);
        let max_rel_error = if scale == 0.0 { 0.0 } else { diff / scale };
        tensors.push(TensorCheck { name, max_rel_error, analytic_max_abs: a_max, numeric_max_abs: n_max });
    }
    let max_rel_error = tensors.iter().fold(0.0f64, |m, t| m.max(t.max_rel_error));
    Ok(GradCheckReport {
        head: config.head,
        lstm_layers: config.lstm_layers,
        use_conv: config.use_conv,
        sequence_length: t_len,
        tensors,
        max_rel_error,
        tolerance,
        passed: max_rel_error < tolerance,
    })
}
