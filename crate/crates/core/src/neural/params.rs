use ndarray::{Array1, Array2, Array3};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ModelConfig;

/// Weights of one LSTM layer. Gate rows are stacked `[input, forget, cell, output]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    /// `4H x D_in`
    pub w_input: Array2<f64>,
    /// `4H x H`
    pub w_hidden: Array2<f64>,
    /// `4H`
    pub bias: Array1<f64>,
}

/// Same-padded 1D convolution over time.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    /// `K x C_out x C_in`, tap-major so each tap is a contiguous matrix.
    pub weight: Array3<f64>,
    pub bias: Array1<f64>,
}

/// Pointwise linear output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams {
    pub weight: Array1<f64>,
    pub bias: Array1<f64>,
}

/// All trainable tensors of a [`super::SequenceModel`]. Also used to hold
/// gradients and optimizer moments, which share the same shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    pub lstm: Vec<LstmParams>,
    pub conv: Option<ConvParams>,
    pub head: HeadParams,
}

impl Parameters {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let h = cfg.hidden_dim;
        let lstm = (0..cfg.lstm_layers)
            .map(|l| {
                let d_in = if l == 0 { cfg.input_dim } else { h };
                LstmParams {
                    w_input: Array2::zeros((4 * h, d_in)),
                    w_hidden: Array2::zeros((4 * h, h)),
                    bias: Array1::zeros(4 * h),
                }
            })
            .collect();
        let conv = cfg.use_conv.then(|| ConvParams {
            weight: Array3::zeros((cfg.conv_kernel, cfg.conv_channels, h)),
            bias: Array1::zeros(cfg.conv_channels),
        });
        let head = HeadParams { weight: Array1::zeros(cfg.head_input_dim()), bias: Array1::zeros(1) };
        Self { lstm, conv, head }
    }

    /// Uniform in `+-1/sqrt(H)`, forget-gate biases set to 1.
    pub fn init(cfg: &ModelConfig) -> Self {
        let mut p = Self::zeros(cfg);
        let bound = 1.0 / (cfg.hidden_dim as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        for (_, t) in p.tensors_mut() {
            t.iter_mut().for_each(|v| *v = rng.random_range(-bound..bound));
        }
        let h = cfg.hidden_dim;
        for layer in &mut p.lstm {
            layer.bias.slice_mut(ndarray::s![h..2 * h]).fill(1.0);
        }
        p
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.fill(0.0);
        z
    }

    pub fn fill(&mut self, value: f64) {
        for (_, t) in self.tensors_mut() {
            t.fill(value);
        }
    }

    /// Named views of every tensor in a fixed order.
    pub fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<(String, &[f64])> = Vec::new();
        for (l, layer) in self.lstm.iter().enumerate() {
            out.push((format!("lstm{l}.w_input"), layer.w_input.as_slice().unwrap()));
            out.push((format!("lstm{l}.w_hidden"), layer.w_hidden.as_slice().unwrap()));
            out.push((format!("lstm{l}.bias"), layer.bias.as_slice().unwrap()));
        }
        if let Some(conv) = &self.conv {
            out.push(("conv.weight".into(), conv.weight.as_slice().unwrap()));
            out.push(("conv.bias".into(), conv.bias.as_slice().unwrap()));
        }
        out.push(("head.weight".into(), self.head.weight.as_slice().unwrap()));
        out.push(("head.bias".into(), self.head.bias.as_slice().unwrap()));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out: Vec<(String, &mut [f64])> = Vec::new();
        for (l, layer) in self.lstm.iter_mut().enumerate() {
            out.push((format!("lstm{l}.w_input"), layer.w_input.as_slice_mut().unwrap()));
            out.push((format!("lstm{l}.w_hidden"), layer.w_hidden.as_slice_mut().unwrap()));
            out.push((format!("lstm{l}.bias"), layer.bias.as_slice_mut().unwrap()));
        }
        if let Some(conv) = &mut self.conv {
            out.push(("conv.weight".into(), conv.weight.as_slice_mut().unwrap()));
            out.push(("conv.bias".into(), conv.bias.as_slice_mut().unwrap()));
        }
        out.push(("head.weight".into(), self.head.weight.as_slice_mut().unwrap()));
        out.push(("head.bias".into(), self.head.bias.as_slice_mut().unwrap()));
        out
    }

    pub fn shapes(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        for layer in &self.lstm {
            out.push(layer.w_input.shape().to_vec());
            out.push(layer.w_hidden.shape().to_vec());
            out.push(layer.bias.shape().to_vec());
        }
        if let Some(conv) = &self.conv {
            out.push(conv.weight.shape().to_vec());
            out.push(conv.bias.shape().to_vec());
        }
        out.push(self.head.weight.shape().to_vec());
        out.push(self.head.bias.shape().to_vec());
        out
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }

    pub fn to_named(&self) -> Vec<NamedTensor> {
        self.tensors()
            .into_iter()
            .zip(self.shapes())
            .map(|((name, data), shape)| NamedTensor { name, shape, data: data.to_vec() })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}
