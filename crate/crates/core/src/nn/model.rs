//! Layer stack, parameter bookkeeping and the emotion CNN architecture.

use serde::{Deserialize, Serialize};

use super::ops::{self, BatchNormCache, Mode, RunningStats};
use super::{AdamConfig, NnError, Tensor};
use crate::rng::SplitMix64;

const INIT_STREAM: u64 = 0x1417;
const DROPOUT_STREAM: u64 = 0xD50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv1d { filters: usize, kernel: usize },
    Batchnorm { momentum: f64, epsilon: f64 },
    Maxpool1d { pool: usize, stride: usize },
    Relu,
    Dropout { rate: f64 },
    Flatten,
    Dense { units: usize },
    Softmax,
}

impl LayerSpec {
    pub fn batchnorm() -> Self {
        LayerSpec::Batchnorm { momentum: 0.99, epsilon: 1e-3 }
    }
}

/// Conv widths of the six convolution blocks.
pub const DEFAULT_CONV_FILTERS: [usize; 6] = [512, 512, 256, 256, 128, 128];

/// conv -> relu -> BN -> pool, repeated six times with dropout after every
/// second block, then flatten -> dense(512) -> relu -> BN -> dense(7) ->
/// softmax.
pub fn ser_layer_specs(conv_filters: &[usize; 6], class_count: usize) -> Vec<LayerSpec> {
    let mut layers = Vec::new();
    for (i, &filters) in conv_filters.iter().enumerate() {
        layers.push(LayerSpec::Conv1d { filters, kernel: 5 });
        layers.push(LayerSpec::Relu);
        layers.push(LayerSpec::batchnorm());
        layers.push(LayerSpec::Maxpool1d { pool: 5, stride: 2 });
        if i % 2 == 1 {
            layers.push(LayerSpec::Dropout { rate: 0.2 });
        }
    }
    layers.extend([
        LayerSpec::Flatten,
        LayerSpec::Dense { units: 512 },
        LayerSpec::Relu,
        LayerSpec::batchnorm(),
        LayerSpec::Dense { units: class_count },
        LayerSpec::Softmax,
    ]);
    layers
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub layers: Vec<LayerSpec>,
    pub class_count: usize,
    pub input_len: usize,
    pub optimizer: AdamConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub rng_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            layers: ser_layer_specs(&DEFAULT_CONV_FILTERS, 7),
            class_count: 7,
            input_len: 22,
            optimizer: AdamConfig::default(),
            epochs: 50,
            batch_size: 64,
            rng_seed: 42,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        let invalid = |m: String| Err(NnError::InvalidConfig(m));
        if self.input_len == 0 || self.class_count < 2 {
            return invalid("input_len must be positive and class_count at least 2".into());
        }
        if self.batch_size == 0 {
            return invalid("batch_size must be positive".into());
        }
        match self.layers.as_slice() {
            [.., LayerSpec::Dense { units }, LayerSpec::Softmax] if *units == self.class_count => {}
            _ => return invalid(format!("model must end with dense({}) + softmax", self.class_count)),
        }
        for spec in &self.layers {
            match *spec {
                LayerSpec::Conv1d { filters, kernel } if filters == 0 || kernel % 2 == 0 => {
                    return invalid(format!("conv1d needs filters > 0 and an odd kernel, got {spec:?}"))
                }
                LayerSpec::Maxpool1d { pool, stride } if pool == 0 || stride == 0 => {
                    return invalid(format!("bad pooling {spec:?}"))
                }
                LayerSpec::Dropout { rate } if !(0.0..1.0).contains(&rate) => {
                    return invalid(format!("dropout rate {rate} outside [0, 1)"))
                }
                LayerSpec::Dense { units: 0 } => return invalid("dense layer with zero units".into()),
                LayerSpec::Batchnorm { momentum, epsilon } if !(0.0..=1.0).contains(&momentum) || epsilon <= 0.0 => {
                    return invalid(format!("bad batchnorm settings {spec:?}"))
                }
                _ => {}
            }
        }
        self.optimizer.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv1d { weight: Tensor, bias: Tensor },
    Batchnorm { gamma: Tensor, beta: Tensor, running: RunningStats, momentum: f64, epsilon: f64 },
    Maxpool1d { pool: usize, stride: usize },
    Relu,
    Dropout { rate: f64 },
    Flatten,
    Dense { weight: Tensor, bias: Tensor },
    Softmax,
}

impl Layer {
    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Conv1d { .. } => "conv1d",
            Layer::Batchnorm { .. } => "batchnorm",
            Layer::Maxpool1d { .. } => "maxpool1d",
            Layer::Relu => "relu",
            Layer::Dropout { .. } => "dropout",
            Layer::Flatten => "flatten",
            Layer::Dense { .. } => "dense",
            Layer::Softmax => "softmax",
        }
    }

    /// Trainable parameters in a fixed order.
    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Layer::Conv1d { weight, bias } | Layer::Dense { weight, bias } => vec![weight, bias],
            Layer::Batchnorm { gamma, beta, .. } => vec![gamma, beta],
            _ => vec![],
        }
    }

    pub fn params(&self) -> Vec<&Tensor> {
        match self {
            Layer::Conv1d { weight, bias } | Layer::Dense { weight, bias } => vec![weight, bias],
            Layer::Batchnorm { gamma, beta, .. } => vec![gamma, beta],
            _ => vec![],
        }
    }
}

/// What a layer keeps from its forward pass for the backward pass.
pub enum Cache {
    Input(Tensor),
    Batchnorm(BatchNormCache),
    Pool { argmax: Vec<usize>, input_shape: Vec<usize> },
    Mask(Vec<f64>),
    Shape(Vec<usize>),
    Probs(Tensor),
    None,
}

/// Identifies one training step so dropout masks can be replayed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepKey {
    pub seed: u64,
    pub epoch: u64,
    pub batch: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub layers: Vec<Layer>,
}

fn he_normal(shape: &[usize], fan_in: usize, rng: &mut SplitMix64) -> Tensor {
    let std = (2.0 / fan_in as f64).sqrt();
    let mut t = Tensor::zeros(shape);
    t.data_mut().iter_mut().for_each(|w| *w = std * rng.next_gaussian());
    t
}

impl Model {
    /// Instantiates the layer stack, He-normal weights and zero biases,
    /// each layer drawing from its own SplitMix64 stream.
    pub fn build(config: &ModelConfig, seed: u64) -> Result<Self, NnError> {
        config.validate()?;
        let (mut len, mut ch) = (config.input_len, 1usize);
        let mut layers = Vec::with_capacity(config.layers.len());
        for (idx, spec) in config.layers.iter().enumerate() {
            let mut rng = SplitMix64::keyed(seed, &[INIT_STREAM, idx as u64]);
            let layer = match *spec {
                LayerSpec::Conv1d { filters, kernel } => {
                    let weight = he_normal(&[kernel, ch, filters], kernel * ch, &mut rng);
                    ch = filters;
                    Layer::Conv1d { weight, bias: Tensor::zeros(&[filters]) }
                }
                LayerSpec::Batchnorm { momentum, epsilon } => Layer::Batchnorm {
                    gamma: Tensor::filled(&[ch], 1.0),
                    beta: Tensor::zeros(&[ch]),
                    running: RunningStats::new(ch),
                    momentum,
                    epsilon,
                },
                LayerSpec::Maxpool1d { pool, stride } => {
                    len = ops::pool_output_len(len, stride);
                    Layer::Maxpool1d { pool, stride }
                }
                LayerSpec::Relu => Layer::Relu,
                LayerSpec::Dropout { rate } => Layer::Dropout { rate },
                LayerSpec::Flatten => {
                    ch *= len;
                    len = 1;
                    Layer::Flatten
                }
                LayerSpec::Dense { units } => {
                    if len != 1 {
                        return Err(NnError::InvalidConfig(format!(
                            "dense layer {idx} needs a flattened input, sequence length is {len}"
                        )));
                    }
                    let weight = he_normal(&[ch, units], ch, &mut rng);
                    ch = units;
                    Layer::Dense { weight, bias: Tensor::zeros(&[units]) }
                }
                LayerSpec::Softmax => Layer::Softmax,
            };
            layers.push(layer);
        }
        Ok(Self { layers })
    }

    /// Runs every layer. In train mode `key` drives dropout masks and the
    /// returned caches feed [`Model::backward`].
    pub fn forward(&mut self, input: &Tensor, mode: Mode, key: Option<StepKey>) -> Result<(Tensor, Vec<Cache>), NnError> {
        self.forward_observed(input, mode, key, |_, _| {})
    }

    /// Inference-mode output shape of every layer, in stack order.
    pub fn layer_output_shapes(&mut self, input: &Tensor) -> Result<Vec<Vec<usize>>, NnError> {
        let mut shapes = Vec::with_capacity(self.layers.len());
        self.forward_observed(input, Mode::Infer, None, |_, y| shapes.push(y.shape().to_vec()))?;
        Ok(shapes)
    }

    fn forward_observed(
        &mut self,
        input: &Tensor,
        mode: Mode,
        key: Option<StepKey>,
        mut observe: impl FnMut(usize, &Tensor),
    ) -> Result<(Tensor, Vec<Cache>), NnError> {
        let mut x = input.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        let train = mode == Mode::Train;
        for (idx, layer) in self.layers.iter_mut().enumerate() {
            let (y, cache) = match layer {
                Layer::Conv1d { weight, bias } => {
                    let y = ops::conv1d_forward(&x, weight, bias)?;
                    (y, if train { Cache::Input(x) } else { Cache::None })
                }
                Layer::Batchnorm { gamma, beta, running, momentum, epsilon } => {
                    let (y, c) = ops::batchnorm_forward(&x, gamma, beta, running, mode, *momentum, *epsilon)?;
                    (y, c.map_or(Cache::None, Cache::Batchnorm))
                }
                Layer::Maxpool1d { pool, stride } => {
                    let (y, argmax) = ops::maxpool1d(&x, *pool, *stride)?;
                    (y, Cache::Pool { argmax, input_shape: x.shape().to_vec() })
                }
                Layer::Relu => {
                    let y = ops::relu_forward(&x);
                    (y, if train { Cache::Input(x) } else { Cache::None })
                }
                Layer::Dropout { rate } => match (train, key) {
                    (true, Some(k)) => {
                        let mut rng = SplitMix64::keyed(k.seed, &[DROPOUT_STREAM, idx as u64, k.epoch, k.batch]);
                        let mask = ops::dropout_mask(x.len(), *rate, &mut rng);
                        (ops::apply_mask(&x, &mask)?, Cache::Mask(mask))
                    }
                    _ => (x, Cache::None),
                },
                Layer::Flatten => {
                    let shape = x.shape().to_vec();
                    (ops::flatten(&x)?, Cache::Shape(shape))
                }
                Layer::Dense { weight, bias } => {
                    let y = ops::dense_forward(&x, weight, bias)?;
                    (y, if train { Cache::Input(x) } else { Cache::None })
                }
                Layer::Softmax => {
                    let p = ops::softmax(&x);
                    (p.clone(), Cache::Probs(p))
                }
            };
            if !y.all_finite() {
                return Err(NnError::NonFinite(format!("layer {idx} ({}) produced non-finite values", layer.kind())));
            }
            observe(idx, &y);
            x = y;
            caches.push(cache);
        }
        Ok((x, caches))
    }

    /// Back-propagates `grad` from the top of the stack. When the stack ends
    /// in softmax and `grad_is_logits` is set, `grad` is taken as the
    /// gradient with respect to the softmax input (the fused cce form).
    /// Returns one gradient per trainable parameter, in
    /// [`Model::params_mut`] order.
    pub fn backward(&self, caches: &[Cache], grad: Tensor, grad_is_logits: bool) -> Result<Vec<Tensor>, NnError> {
        if caches.len() != self.layers.len() {
            return Err(NnError::ShapeMismatch("cache count does not match layer count".into()));
        }
        let mut g = grad;
        let mut per_layer: Vec<Vec<Tensor>> = vec![Vec::new(); self.layers.len()];
        let first_param_layer = self.layers.iter().position(|l| !l.params().is_empty());
        for (idx, (layer, cache)) in self.layers.iter().zip(caches).enumerate().rev() {
            let last = idx + 1 == self.layers.len();
            g = match (layer, cache) {
                (Layer::Softmax, _) if last && grad_is_logits => g,
                (Layer::Softmax, Cache::Probs(p)) => ops::softmax_backward(&g, p)?,
                (Layer::Conv1d { weight, .. }, Cache::Input(x)) => {
                    let need_input = first_param_layer.is_some_and(|f| idx > f);
                    let grads = ops::conv1d_backward(&g, x, weight, need_input)?;
                    per_layer[idx] = vec![grads.weight, grads.bias];
                    grads.input.unwrap_or_else(|| Tensor::zeros(x.shape()))
                }
                (Layer::Batchnorm { gamma, .. }, Cache::Batchnorm(c)) => {
                    let (dx, dgamma, dbeta) = ops::batchnorm_backward(&g, c, gamma)?;
                    per_layer[idx] = vec![dgamma, dbeta];
                    dx
                }
                (Layer::Maxpool1d { .. }, Cache::Pool { argmax, input_shape }) => {
                    ops::maxpool1d_backward(&g, argmax, input_shape)?
                }
                (Layer::Relu, Cache::Input(x)) => ops::relu_backward(&g, x)?,
                (Layer::Dropout { .. }, Cache::Mask(mask)) => ops::apply_mask(&g, mask)?,
                (Layer::Dropout { .. }, Cache::None) => g,
                (Layer::Flatten, Cache::Shape(shape)) => g.reshape(shape)?,
                (Layer::Dense { weight, .. }, Cache::Input(x)) => {
                    let (dx, dw, db) = ops::dense_backward(&g, x, weight)?;
                    per_layer[idx] = vec![dw, db];
                    dx
                }
                (layer, _) => {
                    return Err(NnError::ShapeMismatch(format!(
                        "layer {idx} ({}) has no train-mode cache",
                        layer.kind()
                    )))
                }
            };
        }
        Ok(per_layer.into_iter().flatten().collect())
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn params(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }

    /// Inference-mode class probabilities for a `(batch, len, 1)` input.
    pub fn infer(&mut self, input: &Tensor) -> Result<Tensor, NnError> {
        Ok(self.forward(input, Mode::Infer, None)?.0)
    }
}

/// The default emotion CNN with weights drawn from `seed`.
pub fn build_ser_model(seed: u64) -> Model {
    Model::build(&ModelConfig::default(), seed).expect("default config is valid")
}
