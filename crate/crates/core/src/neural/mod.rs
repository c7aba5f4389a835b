//! Sequence model: stacked LSTM, optional same-padded 1D convolution, and a
//! pointwise linear head, with hand-written backpropagation through time.

mod adam;
mod checkpoint;
mod gradcheck;
mod loss;
mod model;
mod params;
mod train;

pub use adam::{AdamConfig, OptimizerState};
pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use gradcheck::{grad_check, GradCheckReport, TensorCheck};
pub use loss::{combined_loss, combined_loss_grad, count_loss_grad, LossConfig, Target};
pub use model::{backward_and_step, compute_gradients, ForwardCache, SequenceModel};
pub use params::{ConvParams, HeadParams, LstmParams, NamedTensor, Parameters};
pub use train::{train, Schedule, TrainingLog};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Output contract of the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Head {
    /// Per-frame probability of being between repetitions (sigmoid).
    Binary,
    /// Per-frame repetition density (softplus).
    Density,
    /// Sum of per-frame softplus outputs regressed onto the count.
    Count,
}

impl Head {
    pub fn as_str(self) -> &'static str {
        match self {
            Head::Binary => "binary",
            Head::Density => "density",
            Head::Count => "count",
        }
    }
}

impl std::fmt::Display for Head {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Head {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(Head::Binary),
            "density" => Ok(Head::Density),
            "count" => Ok(Head::Count),
            _ => Err(Error::InvalidConfig(format!("unknown head `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub lstm_layers: usize,
    pub use_conv: bool,
    pub conv_kernel: usize,
    pub conv_channels: usize,
    pub head: Head,
    pub seed: u64,
}

impl ModelConfig {
    /// Defaults: hidden size twice the input size, one LSTM layer, kernel-5
    /// convolution with as many channels as hidden units.
    pub fn new(input_dim: usize, head: Head) -> Self {
        let hidden_dim = 2 * input_dim;
        Self {
            input_dim,
            hidden_dim,
            lstm_layers: 1,
            use_conv: true,
            conv_kernel: 5,
            conv_channels: hidden_dim,
            head,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidConfig(m));
        if self.input_dim == 0 || self.hidden_dim == 0 {
            return fail("input and hidden dimensions must be positive".into());
        }
        if !(1..=3).contains(&self.lstm_layers) {
            return fail(format!("lstm_layers {} not in 1..=3", self.lstm_layers));
        }
        if self.use_conv && (self.conv_kernel.is_multiple_of(2) || self.conv_channels == 0) {
            return fail(format!(
                "convolution needs an odd kernel and positive channels (kernel {}, channels {})",
                self.conv_kernel, self.conv_channels
            ));
        }
        Ok(())
    }

    /// Width of the features entering the linear head.
    pub fn head_input_dim(&self) -> usize {
        if self.use_conv {
            self.conv_channels
        } else {
            self.hidden_dim
        }
    }
}
