use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weights of the KL-divergence and L1 terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    pub kl_weight: f64,
    pub l1_weight: f64,
    pub epsilon: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { kl_weight: 1.0, l1_weight: 1.0, epsilon: 1e-8 }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if self.kl_weight < 0.0 || self.l1_weight < 0.0 || self.kl_weight + self.l1_weight <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "loss weights must be nonnegative with a positive sum (kl {}, l1 {})",
                self.kl_weight, self.l1_weight
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig(format!("epsilon {}", self.epsilon)));
        }
        Ok(())
    }
}

/// Supervision for one sequence.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    /// Per-frame target (binary or density heads).
    Sequence(Vec<f64>),
    /// Repetition count (count head).
    Count(f64),
}

/// `kl * KL(p || q) + l1 * mean|pred - target|`, where `p` and `q` are the
/// epsilon-smoothed, sum-normalized target and prediction.
pub fn combined_loss(pred: &[f64], target: &[f64], cfg: &LossConfig) -> Result<f64> {
    combined_loss_grad(pred, target, cfg).map(|(l, _)| l)
}

pub fn combined_loss_grad(pred: &[f64], target: &[f64], cfg: &LossConfig) -> Result<(f64, Vec<f64>)> {
    if pred.len() != target.len() {
        return Err(Error::LengthMismatch { expected: target.len(), actual: pred.len() });
    }
    if pred.is_empty() {
        return Err(Error::EmptyInput("loss over an empty sequence"));
    }
    let n = pred.len() as f64;
    let eps = cfg.epsilon;
    let mut grad = vec![0.0; pred.len()];
    let mut loss = 0.0;

    if cfg.kl_weight > 0.0 {
        let sp: f64 = target.iter().map(|t| t + eps).sum();
        let sq: f64 = pred.iter().map(|q| q + eps).sum();
        let mut kl = 0.0;
        for (i, (&q, &t)) in pred.iter().zip(target).enumerate() {
            let p = (t + eps) / sp;
            kl += p * (p / ((q + eps) / sq)).ln();
            grad[i] += cfg.kl_weight * (1.0 / sq - p / (q + eps));
        }
        loss += cfg.kl_weight * kl;
    }
    if cfg.l1_weight > 0.0 {
        let mut l1 = 0.0;
        for (i, (&q, &t)) in pred.iter().zip(target).enumerate() {
            let d = q - t;
            l1 += d.abs();
            grad[i] += cfg.l1_weight * sign(d) / n;
        }
        loss += cfg.l1_weight * l1 / n;
    }
    Ok((loss, grad))
}

/// `l1 * |sum(pred) - count|` and its gradient with respect to each output.
pub fn count_loss_grad(pred: &[f64], count: f64, cfg: &LossConfig) -> (f64, Vec<f64>) {
    let d = pred.iter().sum::<f64>() - count;
    (cfg.l1_weight * d.abs(), vec![cfg.l1_weight * sign(d); pred.len()])
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}
