//! Fully connected regression network with hand-written backpropagation.
//!
//! Gradients flow to the parameters during training and to the input
//! during dreaming. All arithmetic is f64 and single-threaded per call.

mod io;
pub(crate) mod kernel;
mod train;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{model_from_str, model_to_string, read_model, write_model};
pub use train::{train, EpochRecord, Normalization, TrainConfig, TrainHistory};

pub const DEFAULT_HIDDEN: [usize; 4] = [500, 500, 500, 500];

#[derive(Debug, Error)]
pub enum NetError {
    #[error("input contains a non-finite value at position {0}")]
    NonFiniteInput(usize),
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("training labels have zero variance")]
    DegenerateLabels,
    #[error("training needs at least 2 samples, got {0}")]
    InsufficientData(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("model file line {line}: {message}")]
    ModelFormat { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn shape_mismatch(expected: impl ToString, got: impl ToString) -> NetError {
    NetError::ShapeMismatch {
        expected: expected.to_string(),
        got: got.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    /// Initialisation gain that preserves activation variance.
    pub fn init_gain(self) -> f64 {
        match self {
            Activation::Relu => 6f64.sqrt(),
            Activation::Identity => 3f64.sqrt(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "relu" => Some(Activation::Relu),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }

    fn apply(self, values: &mut [f64]) {
        if self == Activation::Relu {
            for v in values {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
    }

    /// Multiplies `grad` by the derivative, given the activation's output.
    fn backprop(self, output: &[f64], grad: &mut [f64]) {
        if self == Activation::Relu {
            for (g, &o) in grad.iter_mut().zip(output) {
                if o <= 0.0 {
                    *g = 0.0;
                }
            }
        }
    }
}

/// One affine layer; `weights` is row-major `inputs x outputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn weight(&self, input: usize, output: usize) -> f64 {
        self.weights[input * self.outputs + output]
    }
}

/// Rectifier (or identity) hidden layers and a linear scalar head.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
    hidden_activation: Activation,
}

/// Per-layer inputs of one forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    rows: usize,
    // activations[l] is the input to layer l; activations[0] is x.
    activations: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn input(&self) -> &[f64] {
        &self.activations[0]
    }
}

/// Gradients of a scalar loss with respect to all parameters and the input.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub input: Vec<f64>,
}

impl Mlp {
    /// Weights uniform in `[-g/sqrt(fan_in), g/sqrt(fan_in))`, biases zero.
    ///
    /// The gain `g` keeps the activation variance constant from layer to
    /// layer: `sqrt(6)` for rectifiers, `sqrt(3)` for linear layers. With
    /// `g = 1` a stack of four rectifier layers shrinks the signal about
    /// 200-fold and plain gradient descent barely moves.
    pub fn init(dims: &[usize], hidden_activation: Activation, seed: u64) -> Result<Self, NetError> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(NetError::InvalidConfig(format!(
                "dimension chain {dims:?} needs at least two positive sizes"
            )));
        }
        if dims[dims.len() - 1] != 1 {
            return Err(NetError::InvalidConfig("output layer must have size 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = dims
            .windows(2)
            .map(|pair| {
                let (inputs, outputs) = (pair[0], pair[1]);
                let scale = hidden_activation.init_gain() / (inputs as f64).sqrt();
                let weights = (0..inputs * outputs).map(|_| rng.gen_range(-scale..scale)).collect();
                Dense {
                    inputs,
                    outputs,
                    weights,
                    bias: vec![0.0; outputs],
                }
            })
            .collect();
        Ok(Mlp {
            layers,
            hidden_activation,
        })
    }

    pub fn from_layers(layers: Vec<Dense>, hidden_activation: Activation) -> Result<Self, NetError> {
        if layers.is_empty() {
            return Err(NetError::InvalidConfig("no layers".into()));
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.weights.len() != layer.inputs * layer.outputs || layer.bias.len() != layer.outputs {
                return Err(shape_mismatch(
                    format!("layer {i} of {}x{}", layer.inputs, layer.outputs),
                    format!("{} weights, {} biases", layer.weights.len(), layer.bias.len()),
                ));
            }
            if let Some(next) = layers.get(i + 1) {
                if next.inputs != layer.outputs {
                    return Err(shape_mismatch(
                        format!("layer {} input {}", i + 1, layer.outputs),
                        next.inputs,
                    ));
                }
            }
            if layer.weights.iter().chain(&layer.bias).any(|v| !v.is_finite()) {
                return Err(NetError::InvalidConfig(format!("layer {i} has non-finite parameters")));
            }
        }
        if layers[layers.len() - 1].outputs != 1 {
            return Err(NetError::InvalidConfig("output layer must have size 1".into()));
        }
        Ok(Mlp {
            layers,
            hidden_activation,
        })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden_activation
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim()];
        dims.extend(self.layers.iter().map(|l| l.outputs));
        dims
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Order-sensitive hash of every parameter's bit pattern.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        for layer in &self.layers {
            for v in layer.weights.iter().chain(&layer.bias) {
                for byte in v.to_bits().to_le_bytes() {
                    h ^= byte as u64;
                    h = h.wrapping_mul(0x100000001b3);
                }
            }
        }
        h
    }

    fn check_input(&self, x: &[f64], rows: usize) -> Result<(), NetError> {
        let dim = self.input_dim();
        if x.len() != rows * dim {
            return Err(shape_mismatch(rows * dim, x.len()));
        }
        if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
            return Err(NetError::NonFiniteInput(pos));
        }
        Ok(())
    }

    /// Forward pass over `rows` samples stored row-major in `x`.
    pub fn forward_batch(&self, x: &[f64], rows: usize) -> Result<(Vec<f64>, ForwardCache), NetError> {
        self.check_input(x, rows)?;
        Ok(self.forward_unchecked(x.to_vec(), rows))
    }

    pub(crate) fn forward_unchecked(&self, x: Vec<f64>, rows: usize) -> (Vec<f64>, ForwardCache) {
        let mut activations = Vec::with_capacity(self.layers.len());
        activations.push(x);
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut out = vec![0.0; rows * layer.outputs];
            kernel::affine(
                &activations[l],
                rows,
                layer.inputs,
                &layer.weights,
                layer.outputs,
                &layer.bias,
                &mut out,
            );
            if l == last {
                return (out, ForwardCache { rows, activations });
            }
            self.hidden_activation.apply(&mut out);
            activations.push(out);
        }
        unreachable!("network has at least one layer")
    }

    pub fn forward(&self, x: &[f64]) -> Result<(f64, ForwardCache), NetError> {
        let (pred, cache) = self.forward_batch(x, 1)?;
        Ok((pred[0], cache))
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64, NetError> {
        self.forward(x).map(|(p, _)| p)
    }

    fn check_cache(&self, cache: &ForwardCache, rows: usize) -> Result<(), NetError> {
        let ok = cache.rows == rows
            && cache.activations.len() == self.layers.len()
            && self
                .layers
                .iter()
                .zip(&cache.activations)
                .all(|(l, a)| a.len() == rows * l.inputs);
        if ok {
            Ok(())
        } else {
            Err(shape_mismatch(
                format!("cache for {rows} row(s) of {:?}", self.dims()),
                format!("cache for {} row(s)", cache.rows),
            ))
        }
    }

    /// Backpropagates per-row `d_loss/d_pred`. Parameter gradients are
    /// summed over rows; the input gradient is per row.
    pub(crate) fn backward_rows(
        &self,
        cache: &ForwardCache,
        d_pred: &[f64],
        transposed: &[Vec<f64>],
        want_params: bool,
        want_input: bool,
    ) -> GradientBundle {
        let rows = cache.rows;
        let n = self.layers.len();
        let mut weights: Vec<Vec<f64>> = Vec::new();
        let mut biases: Vec<Vec<f64>> = Vec::new();
        if want_params {
            weights = self.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect();
            biases = self.layers.iter().map(|l| vec![0.0; l.outputs]).collect();
        }
        let mut delta = d_pred.to_vec();
        let mut input = Vec::new();
        for l in (0..n).rev() {
            let layer = &self.layers[l];
            if want_params {
                kernel::accumulate_outer(
                    &cache.activations[l],
                    rows,
                    layer.inputs,
                    &delta,
                    layer.outputs,
                    &mut weights[l],
                );
                let db = &mut biases[l];
                for r in 0..rows {
                    for (b, d) in db.iter_mut().zip(&delta[r * layer.outputs..(r + 1) * layer.outputs]) {
                        *b += d;
                    }
                }
            }
            if l == 0 && !want_input {
                break;
            }
            let mut dx = vec![0.0; rows * layer.inputs];
            kernel::backprop_input(&delta, rows, layer.outputs, &transposed[l], layer.inputs, &mut dx);
            if l == 0 {
                input = dx;
            } else {
                self.hidden_activation.backprop(&cache.activations[l], &mut dx);
                delta = dx;
            }
        }
        GradientBundle { weights, biases, input }
    }

    pub(crate) fn transposed_weights(&self) -> Vec<Vec<f64>> {
        self.layers
            .iter()
            .map(|l| kernel::transpose(&l.weights, l.inputs, l.outputs))
            .collect()
    }

    /// Exact gradients of a scalar loss with respect to every parameter and
    /// the input, given `d_loss/d_pred` for the cached forward pass.
    pub fn backward(&self, cache: &ForwardCache, d_loss_d_pred: f64) -> Result<GradientBundle, NetError> {
        self.check_cache(cache, 1)?;
        let transposed = self.transposed_weights();
        Ok(self.backward_rows(cache, &[d_loss_d_pred], &transposed, true, true))
    }

    /// Gradient with respect to the input only.
    pub fn input_gradient(&self, cache: &ForwardCache, d_loss_d_pred: f64) -> Result<Vec<f64>, NetError> {
        self.check_cache(cache, 1)?;
        let transposed = self.transposed_weights();
        Ok(self
            .backward_rows(cache, &[d_loss_d_pred], &transposed, false, true)
            .input)
    }
}

/// A trained network with the label normalisation it was fitted under.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub mlp: Mlp,
    pub normalization: Normalization,
    /// Token rows of the one-hot input.
    pub max_len: usize,
}

impl Model {
    pub fn predict_raw(&self, x: &[f64]) -> Result<f64, NetError> {
        Ok(self.normalization.denormalize(self.mlp.predict(x)?))
    }
}

/// A frozen network prepared for repeated input-gradient evaluation.
pub struct FrozenMlp<'a> {
    mlp: &'a Mlp,
    transposed: Vec<Vec<f64>>,
}

impl<'a> FrozenMlp<'a> {
    pub fn new(mlp: &'a Mlp) -> Self {
        FrozenMlp {
            mlp,
            transposed: mlp.transposed_weights(),
        }
    }

    pub fn mlp(&self) -> &Mlp {
        self.mlp
    }

    /// Predictions and input gradients for `rows` inputs, where the loss for
    /// each row is `(prediction - targets[row])^2`.
    pub fn squared_error_input_gradients(
        &self,
        x: &[f64],
        rows: usize,
        targets: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>), NetError> {
        self.mlp.check_input(x, rows)?;
        if targets.len() != rows {
            return Err(shape_mismatch(rows, targets.len()));
        }
        let (pred, cache) = self.mlp.forward_unchecked(x.to_vec(), rows);
        let d_pred: Vec<f64> = pred.iter().zip(targets).map(|(p, t)| 2.0 * (p - t)).collect();
        let grads = self.mlp.backward_rows(&cache, &d_pred, &self.transposed, false, true);
        Ok((pred, grads.input))
    }
}
