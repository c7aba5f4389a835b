use ndarray::{s, Array1, Array2, ArrayView2, Axis};

use super::loss::{combined_loss_grad, count_loss_grad, LossConfig, Target};
use super::params::{ConvParams, HeadParams, LstmParams, Parameters};
use super::{Head, ModelConfig, OptimizerState};
use crate::error::{Error, Result};
use crate::features::FeatureSequence;

/// Keeps binary-head outputs strictly inside `(0, 1)`.
const PROB_MARGIN: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceModel {
    pub config: ModelConfig,
    pub params: Parameters,
}

struct LayerCache {
    input: Array2<f64>,
    /// Activated gates, `T x 4H`.
    gates: Array2<f64>,
    cell: Array2<f64>,
    tanh_cell: Array2<f64>,
    hidden: Array2<f64>,
}

/// Intermediate activations kept for the backward pass.
pub struct ForwardCache {
    layers: Vec<LayerCache>,
    /// Post-tanh convolution output, `T x C`.
    conv_out: Option<Array2<f64>>,
    pre_activation: Array1<f64>,
    pub output: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

impl SequenceModel {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let params = Parameters::init(&config);
        Ok(Self { config, params })
    }

    pub fn head(&self) -> Head {
        self.config.head
    }

    fn check_input(&self, feats: &FeatureSequence) -> Result<()> {
        if feats.dim() != self.config.input_dim {
            return Err(Error::DimensionMismatch { expected: self.config.input_dim, actual: feats.dim() });
        }
        if feats.is_empty() {
            return Err(Error::EmptyInput("feature sequence"));
        }
        Ok(())
    }

    /// One output per frame: softplus for density/count heads, sigmoid for binary.
    pub fn forward(&self, feats: &FeatureSequence) -> Result<Vec<f64>> {
        Ok(self.forward_cached(feats)?.output)
    }

    pub fn forward_cached(&self, feats: &FeatureSequence) -> Result<ForwardCache> {
        self.check_input(feats)?;
        let mut layers: Vec<LayerCache> = Vec::with_capacity(self.params.lstm.len());
        for p in &self.params.lstm {
            let input = layers.last().map_or_else(|| feats.values.clone(), |l| l.hidden.clone());
            layers.push(lstm_forward(p, input));
        }
        let top = &layers.last().expect("at least one layer").hidden;
        let conv_out = self.params.conv.as_ref().map(|c| conv_forward(c, top.view()));
        let head_in = conv_out.as_ref().unwrap_or(top);
        let pre_activation = head_in.dot(&self.params.head.weight) + self.params.head.bias[0];
        let output = pre_activation
            .iter()
            .map(|&z| match self.config.head {
                Head::Binary => sigmoid(z).clamp(PROB_MARGIN, 1.0 - PROB_MARGIN),
                Head::Density | Head::Count => softplus(z),
            })
            .collect();
        Ok(ForwardCache { layers, conv_out, pre_activation, output })
    }

    /// Sum of the per-frame outputs of a count-head model.
    pub fn predict_count(&self, feats: &FeatureSequence) -> Result<f64> {
        if self.config.head != Head::Count {
            return Err(Error::HeadMismatch { expected: "count".into(), actual: self.config.head.to_string() });
        }
        Ok(self.forward(feats)?.iter().sum())
    }

    /// Loss of the current parameters on one sample.
    pub fn loss(&self, feats: &FeatureSequence, target: &Target, cfg: &LossConfig) -> Result<f64> {
        let out = self.forward(feats)?;
        Ok(loss_and_output_grad(self.config.head, &out, target, cfg)?.0)
    }

    fn backward(&self, cache: &ForwardCache, d_output: &[f64]) -> Parameters {
        let mut grads = self.params.zeros_like();
        let dz: Array1<f64> = cache
            .pre_activation
            .iter()
            .zip(d_output)
            .map(|(&z, &g)| match self.config.head {
                Head::Binary => {
                    let s = sigmoid(z);
                    g * s * (1.0 - s)
                }
                // d softplus / dz = sigmoid
                Head::Density | Head::Count => g * sigmoid(z),
            })
            .collect();

        let top = &cache.layers.last().unwrap().hidden;
        let head_in = cache.conv_out.as_ref().unwrap_or(top);
        let (head_grad, d_head_in) = head_backward(&self.params.head, head_in.view(), &dz);
        grads.head = head_grad;

        let mut d_hidden = match (&self.params.conv, &cache.conv_out) {
            (Some(conv), Some(out)) => {
                let (g, d_in) = conv_backward(conv, top.view(), out.view(), d_head_in);
                grads.conv = Some(g);
                d_in
            }
            _ => d_head_in,
        };
        for (l, (p, lc)) in self.params.lstm.iter().zip(&cache.layers).enumerate().rev() {
            let (g, d_in) = lstm_backward(p, lc, &d_hidden);
            grads.lstm[l] = g;
            d_hidden = d_in;
        }
        grads
    }
}

fn loss_and_output_grad(head: Head, out: &[f64], target: &Target, cfg: &LossConfig) -> Result<(f64, Vec<f64>)> {
    match (head, target) {
        (Head::Count, Target::Count(c)) => Ok(count_loss_grad(out, *c, cfg)),
        (Head::Binary | Head::Density, Target::Sequence(t)) => combined_loss_grad(out, t, cfg),
        (h, Target::Count(_)) => Err(Error::HeadMismatch { expected: "count".into(), actual: h.to_string() }),
        (h, Target::Sequence(_)) => Err(Error::HeadMismatch { expected: "binary or density".into(), actual: h.to_string() }),
    }
}

/// Loss and analytic gradient of every parameter for one sample.
pub fn compute_gradients(
    model: &SequenceModel,
    feats: &FeatureSequence,
    target: &Target,
    loss_cfg: &LossConfig,
) -> Result<(f64, Parameters)> {
    let cache = model.forward_cached(feats)?;
    let (loss, d_out) = loss_and_output_grad(model.config.head, &cache.output, target, loss_cfg)?;
    Ok((loss, model.backward(&cache, &d_out)))
}

/// Computes gradients, applies one Adam update and returns the pre-update loss.
/// A non-finite gradient aborts before any parameter changes.
pub fn backward_and_step(
    model: &mut SequenceModel,
    feats: &FeatureSequence,
    target: &Target,
    loss_cfg: &LossConfig,
    opt: &mut OptimizerState,
) -> Result<f64> {
    let (loss, grads) = compute_gradients(model, feats, target, loss_cfg)?;
    for (name, g) in grads.tensors() {
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient(name));
        }
    }
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!("loss {loss}")));
    }
    opt.update(&mut model.params, &grads);
    Ok(loss)
}

fn lstm_forward(p: &LstmParams, input: Array2<f64>) -> LayerCache {
    let t_len = input.nrows();
    let h = p.w_hidden.ncols();
    let mut gates = input.dot(&p.w_input.t()) + &p.bias;
    let mut cell = Array2::zeros((t_len, h));
    let mut tanh_cell = Array2::zeros((t_len, h));
    let mut hidden = Array2::<f64>::zeros((t_len, h));
    for t in 0..t_len {
        let mut z = gates.row_mut(t);
        if t > 0 {
            z += &p.w_hidden.dot(&hidden.row(t - 1));
        }
        for k in 0..h {
            let i = sigmoid(z[k]);
            let f = sigmoid(z[h + k]);
            let g = z[2 * h + k].tanh();
            let o = sigmoid(z[3 * h + k]);
            z[k] = i;
            z[h + k] = f;
            z[2 * h + k] = g;
            z[3 * h + k] = o;
            let c_prev = if t > 0 { cell[[t - 1, k]] } else { 0.0 };
            let c = f * c_prev + i * g;
            let tc = c.tanh();
            cell[[t, k]] = c;
            tanh_cell[[t, k]] = tc;
            hidden[[t, k]] = o * tc;
        }
    }
    LayerCache { input, gates, cell, tanh_cell, hidden }
}

fn lstm_backward(p: &LstmParams, cache: &LayerCache, d_hidden: &Array2<f64>) -> (LstmParams, Array2<f64>) {
    let t_len = cache.input.nrows();
    let h = p.w_hidden.ncols();
    let w_hidden_t = p.w_hidden.t().as_standard_layout().into_owned();
    let mut dz = Array2::<f64>::zeros((t_len, 4 * h));
    let mut dh_next = Array1::<f64>::zeros(h);
    let mut dc_next = Array1::<f64>::zeros(h);
    for t in (0..t_len).rev() {
        let gates = cache.gates.row(t);
        let mut dzt = dz.row_mut(t);
        for k in 0..h {
            let (i, f, g, o) = (gates[k], gates[h + k], gates[2 * h + k], gates[3 * h + k]);
            let tc = cache.tanh_cell[[t, k]];
            let dh = d_hidden[[t, k]] + dh_next[k];
            let dc = dh * o * (1.0 - tc * tc) + dc_next[k];
            let c_prev = if t > 0 { cache.cell[[t - 1, k]] } else { 0.0 };
            dzt[k] = dc * g * i * (1.0 - i);
            dzt[h + k] = dc * c_prev * f * (1.0 - f);
            dzt[2 * h + k] = dc * i * (1.0 - g * g);
            dzt[3 * h + k] = dh * tc * o * (1.0 - o);
            dc_next[k] = dc * f;
        }
        if t > 0 {
            dh_next = w_hidden_t.dot(&dz.row(t));
        }
    }
    let w_input = dz.t().dot(&cache.input);
    let w_hidden = if t_len > 1 {
        dz.slice(s![1.., ..]).t().dot(&cache.hidden.slice(s![..t_len - 1, ..]))
    } else {
        Array2::zeros((4 * h, h))
    };
    let bias = dz.sum_axis(Axis(0));
    let d_input = dz.dot(&p.w_input);
    (LstmParams { w_input, w_hidden, bias }, d_input)
}

/// Output row ranges paired with input row ranges for tap `k`.
fn tap_ranges(t_len: usize, kernel: usize, k: usize) -> Option<(std::ops::Range<usize>, std::ops::Range<usize>)> {
    let offset = k as isize - (kernel / 2) as isize;
    let lo = (-offset).max(0) as usize;
    let hi = (t_len as isize - offset).min(t_len as isize);
    if hi <= lo as isize {
        return None;
    }
    let hi = hi as usize;
    let src = (lo as isize + offset) as usize..(hi as isize + offset) as usize;
    Some((lo..hi, src))
}

fn conv_forward(p: &ConvParams, input: ArrayView2<f64>) -> Array2<f64> {
    let t_len = input.nrows();
    let (kernel, channels, _) = p.weight.dim();
    let mut out = Array2::<f64>::zeros((t_len, channels)) + &p.bias;
    for k in 0..kernel {
        if let Some((dst, src)) = tap_ranges(t_len, kernel, k) {
            let w = p.weight.index_axis(Axis(0), k);
            let contrib = input.slice(s![src, ..]).dot(&w.t());
            let mut o = out.slice_mut(s![dst, ..]);
            o += &contrib;
        }
    }
    out.mapv_inplace(f64::tanh);
    out
}

fn conv_backward(
    p: &ConvParams,
    input: ArrayView2<f64>,
    output: ArrayView2<f64>,
    d_output: Array2<f64>,
) -> (ConvParams, Array2<f64>) {
    let t_len = input.nrows();
    let kernel = p.weight.dim().0;
    let d_pre = d_output * &output.mapv(|a| 1.0 - a * a);
    let mut weight = ndarray::Array3::zeros(p.weight.raw_dim());
    let mut d_input = Array2::zeros(input.raw_dim());
    for k in 0..kernel {
        if let Some((dst, src)) = tap_ranges(t_len, kernel, k) {
            let g = d_pre.slice(s![dst, ..]);
            weight.index_axis_mut(Axis(0), k).assign(&g.t().dot(&input.slice(s![src.clone(), ..])));
            let mut di = d_input.slice_mut(s![src, ..]);
            di += &g.dot(&p.weight.index_axis(Axis(0), k));
        }
    }
    let bias = d_pre.sum_axis(Axis(0));
    (ConvParams { weight, bias }, d_input)
}

fn head_backward(p: &HeadParams, input: ArrayView2<f64>, dz: &Array1<f64>) -> (HeadParams, Array2<f64>) {
    let weight = input.t().dot(dz);
    let bias = Array1::from_elem(1, dz.sum());
    let d_input = dz
        .view()
        .insert_axis(Axis(1))
        .dot(&p.weight.view().insert_axis(Axis(0)));
    (HeadParams { weight, bias }, d_input)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureVariant;

    fn feats(t: usize, d: usize) -> FeatureSequence {
        FeatureSequence::new(Array2::from_shape_fn((t, d), |(i, j)| ((i * 7 + j * 3) % 5) as f64 * 0.3 - 0.6), FeatureVariant::Raw)
    }

    #[test]
    fn zero_model_hand_computed() {
        // zero weights and input: every LSTM gate is sigmoid(0)=0.5 (forget
        // bias zeroed too), g = tanh(0) = 0, so c = h = 0. With the head bias
        // at b the output is softplus(b) everywhere.
        let mut cfg = ModelConfig::new(1, Head::Density);
        cfg.hidden_dim = 2;
        cfg.conv_channels = 2;
        let mut model = SequenceModel::new(cfg).unwrap();
        model.params.fill(0.0);
        model.params.head.bias[0] = 0.5;
        let x = FeatureSequence::new(Array2::zeros((3, 1)), FeatureVariant::Raw);
        let out = model.forward(&x).unwrap();
        let expected = (1.0 + 0.5f64.exp()).ln();
        assert_eq!(out.len(), 3);
        for v in out {
            assert!((v - expected).abs() < 1e-15);
        }

        // conv bias 0.3 gives tanh(0.3) at every step; head weight 2 on channel 0
        model.params.conv.as_mut().unwrap().bias.fill(0.3);
        model.params.head.weight[0] = 2.0;
        model.config.head = Head::Binary;
        let out = model.forward(&x).unwrap();
        let z: f64 = 2.0 * 0.3f64.tanh() + 0.5;
        for v in out {
            assert!((v - 1.0 / (1.0 + (-z).exp())).abs() < 1e-15);
        }
    }

    #[test]
    fn output_lengths_and_ranges() {
        for head in [Head::Binary, Head::Density, Head::Count] {
            let model = SequenceModel::new(ModelConfig { seed: 3, ..ModelConfig::new(4, head) }).unwrap();
            for t in [1, 2, 500] {
                let out = model.forward(&feats(t, 4)).unwrap();
                assert_eq!(out.len(), t);
                match head {
                    Head::Binary => assert!(out.iter().all(|&v| v > 0.0 && v < 1.0)),
                    _ => assert!(out.iter().all(|&v| v >= 0.0)),
                }
            }
        }
    }

    #[test]
    fn dimension_and_head_mismatch() {
        let model = SequenceModel::new(ModelConfig::new(4, Head::Density)).unwrap();
        assert!(matches!(model.forward(&feats(5, 3)), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(model.predict_count(&feats(5, 4)), Err(Error::HeadMismatch { .. })));
        let target = Target::Count(2.0);
        assert!(matches!(
            model.loss(&feats(5, 4), &target, &LossConfig::default()),
            Err(Error::HeadMismatch { .. })
        ));
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let cfg = ModelConfig { seed: 11, lstm_layers: 2, ..ModelConfig::new(5, Head::Density) };
        let a = SequenceModel::new(cfg.clone()).unwrap();
        let b = SequenceModel::new(cfg.clone()).unwrap();
        assert_eq!(a.params, b.params);
        let bound = 1.0 / (cfg.hidden_dim as f64).sqrt();
        let h = cfg.hidden_dim;
        for (name, t) in a.params.tensors() {
            for (i, &v) in t.iter().enumerate() {
                let forget = name.ends_with(".bias") && name.starts_with("lstm") && (h..2 * h).contains(&i);
                if forget {
                    assert_eq!(v, 1.0);
                } else {
                    assert!(v.is_finite() && v.abs() <= bound, "{name}[{i}] = {v}");
                }
            }
        }
    }

    #[test]
    fn predict_count_sums_outputs() {
        let model = SequenceModel::new(ModelConfig { seed: 2, ..ModelConfig::new(3, Head::Count) }).unwrap();
        let x = feats(17, 3);
        let out = model.forward(&x).unwrap();
        let mut manual = 0.0;
        for v in &out {
            manual += v;
        }
        assert!((model.predict_count(&x).unwrap() - manual).abs() < 1e-12);

        let mut zero = model.clone();
        zero.params.fill(0.0);
        zero.params.head.bias[0] = -800.0;
        assert_eq!(zero.predict_count(&x).unwrap(), 0.0);
    }

    #[test]
    fn zero_learning_rate_leaves_parameters() {
        let mut model = SequenceModel::new(ModelConfig::new(3, Head::Density)).unwrap();
        let before = model.params.clone();
        let mut opt = OptimizerState::with_learning_rate(&model.params, 0.0);
        let target = Target::Sequence(vec![0.1; 9]);
        backward_and_step(&mut model, &feats(9, 3), &target, &LossConfig::default(), &mut opt).unwrap();
        assert_eq!(model.params, before);
    }

    #[test]
    fn non_finite_gradient_aborts_update() {
        let mut model = SequenceModel::new(ModelConfig::new(3, Head::Density)).unwrap();
        let mut x = feats(6, 3);
        x.values[[2, 1]] = f64::NAN;
        let before = model.params.clone();
        let mut opt = OptimizerState::with_learning_rate(&model.params, 1e-3);
        let err = backward_and_step(&mut model, &x, &Target::Sequence(vec![0.1; 6]), &LossConfig::default(), &mut opt)
            .unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient(ref name) if name.starts_with("lstm0")), "{err}");
        assert_eq!(model.params, before);
    }
}
