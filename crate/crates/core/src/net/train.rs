use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{kernel, Activation, Mlp, Model, NetError, DEFAULT_HIDDEN};
use crate::selfies::{OneHotMatrix, ALPHABET_SIZE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub train_fraction: f64,
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 128,
            epochs: 200,
            seed: 0,
            train_fraction: 0.8,
            hidden: DEFAULT_HIDDEN.to_vec(),
            activation: Activation::Relu,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NetError> {
        let bad = |m: &str| Err(NetError::InvalidConfig(m.to_string()));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad("train_fraction must lie in (0, 1)");
        }
        if self.hidden.contains(&0) {
            return bad("hidden layer sizes must be positive");
        }
        Ok(())
    }
}

/// Affine map between raw property units and the zero-mean, unit-variance
/// scale the network is trained on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: f64,
    pub std: f64,
}

impl Normalization {
    pub fn normalize(&self, raw: f64) -> f64 {
        (raw - self.mean) / self.std
    }

    pub fn denormalize(&self, scaled: f64) -> f64 {
        scaled * self.std + self.mean
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean squared error over the epoch's mini-batches, normalised units.
    pub train_mse: f64,
    pub validation_mse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub train_indices: Vec<usize>,
    pub validation_indices: Vec<usize>,
}

fn gather(data: &[(OneHotMatrix, f64)], indices: &[usize], dim: usize) -> Vec<f64> {
    let mut x = Vec::with_capacity(indices.len() * dim);
    for &i in indices {
        x.extend_from_slice(data[i].0.values());
    }
    x
}

/// Mean squared error in normalised units over `indices`.
fn evaluate(mlp: &Mlp, data: &[(OneHotMatrix, f64)], indices: &[usize], norm: &Normalization, chunk: usize) -> f64 {
    let dim = mlp.input_dim();
    let mut total = 0.0;
    for block in indices.chunks(chunk) {
        let x = gather(data, block, dim);
        let (pred, _) = mlp.forward_unchecked(x, block.len());
        for (p, &i) in pred.iter().zip(block) {
            let e = p - norm.normalize(data[i].1);
            total += e * e;
        }
    }
    total / indices.len() as f64
}

/// Mini-batch gradient descent on mean squared error of standardised labels.
///
/// The data is split once (seeded shuffle) into training and validation
/// parts; training samples are reshuffled every epoch from the same stream.
pub fn train(data: &[(OneHotMatrix, f64)], cfg: &TrainConfig) -> Result<(Model, TrainHistory), NetError> {
    cfg.validate()?;
    let n = data.len();
    if n < 2 {
        return Err(NetError::InsufficientData(n));
    }
    let rows = data[0].0.rows();
    let dim = rows * ALPHABET_SIZE;
    if let Some(bad) = data.iter().position(|(m, _)| m.rows() != rows) {
        return Err(NetError::ShapeMismatch {
            expected: format!("{rows} rows"),
            got: format!("sample {bad} with {} rows", data[bad].0.rows()),
        });
    }
    if let Some(pos) = data
        .iter()
        .position(|(m, y)| !y.is_finite() || m.values().iter().any(|v| !v.is_finite()))
    {
        return Err(NetError::NonFiniteInput(pos));
    }

    let mut dims = vec![dim];
    dims.extend(&cfg.hidden);
    dims.push(1);
    let mut mlp = Mlp::init(&dims, cfg.activation, cfg.seed)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_train = ((n as f64 * cfg.train_fraction).round() as usize).clamp(2, n);
    let mut train_idx = order[..n_train].to_vec();
    let validation_idx = order[n_train..].to_vec();

    let labels: Vec<f64> = train_idx.iter().map(|&i| data[i].1).collect();
    let mean = labels.iter().sum::<f64>() / labels.len() as f64;
    let var = labels.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / labels.len() as f64;
    if var <= 0.0 {
        return Err(NetError::DegenerateLabels);
    }
    let normalization = Normalization { mean, std: var.sqrt() };

    let mut history = TrainHistory {
        epochs: Vec::with_capacity(cfg.epochs),
        train_indices: train_idx.clone(),
        validation_indices: validation_idx.clone(),
    };

    for epoch in 1..=cfg.epochs {
        train_idx.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in train_idx.chunks(cfg.batch_size) {
            let b = batch.len();
            let x = gather(data, batch, dim);
            let (pred, cache) = mlp.forward_unchecked(x, b);
            let mut d_pred = Vec::with_capacity(b);
            for (p, &i) in pred.iter().zip(batch) {
                let e = p - normalization.normalize(data[i].1);
                loss_sum += e * e;
                d_pred.push(2.0 * e / b as f64);
            }
            // The first layer's input gradient is never needed here.
            let transposed: Vec<Vec<f64>> = mlp
                .layers()
                .iter()
                .enumerate()
                .map(|(l, layer)| {
                    if l == 0 {
                        Vec::new()
                    } else {
                        kernel::transpose(&layer.weights, layer.inputs, layer.outputs)
                    }
                })
                .collect();
            let grads = mlp.backward_rows(&cache, &d_pred, &transposed, true, false);
            for (layer, (gw, gb)) in mlp.layers_mut().iter_mut().zip(grads.weights.iter().zip(&grads.biases)) {
                for (w, g) in layer.weights.iter_mut().zip(gw) {
                    *w -= cfg.learning_rate * g;
                }
                for (w, g) in layer.bias.iter_mut().zip(gb) {
                    *w -= cfg.learning_rate * g;
                }
            }
        }
        let validation_mse = if validation_idx.is_empty() {
            None
        } else {
            Some(evaluate(&mlp, data, &validation_idx, &normalization, cfg.batch_size))
        };
        history.epochs.push(EpochRecord {
            epoch,
            train_mse: loss_sum / n_train as f64,
            validation_mse,
        });
    }

    if mlp
        .layers()
        .iter()
        .any(|l| l.weights.iter().chain(&l.bias).any(|v| !v.is_finite()))
    {
        return Err(NetError::InvalidConfig(
            "training diverged to non-finite parameters; lower the learning rate".into(),
        ));
    }

    Ok((
        Model {
            mlp,
            normalization,
            max_len: rows,
        },
        history,
    ))
}
