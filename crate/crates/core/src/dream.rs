//! Dreaming: gradient descent on the input of a frozen network.
//!
//! A molecule is encoded to a one-hot matrix, every zero entry is lifted to
//! a random value below `noise_upper_bound`, and the matrix is then moved
//! along `-d loss / d input` with `loss = (prediction - target)^2` in the
//! network's normalised units. After each update the matrix is read back
//! through a per-row argmax and decoded; every change of molecule is
//! recorded. The weights are never touched.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::molgraph::{canonical_key, write_smiles, CanonicalKey, MolecularGraph};
use crate::net::{FrozenMlp, Model, NetError};
use crate::selfies::{
    decode, encode, from_onehot_argmax, to_onehot, EncodeError, OneHotError, OneHotMatrix, TokenSequence,
};

#[derive(Debug, Error)]
pub enum DreamError {
    #[error("input matrix is not an exact one-hot encoding")]
    NotOneHot,
    #[error("invalid dream configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Encoding(#[from] EncodeError),
    #[error(transparent)]
    OneHot(#[from] OneHotError),
    #[error(transparent)]
    Net(#[from] NetError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DreamConfig {
    /// Target property value in raw (unnormalised) units.
    pub target: f64,
    /// Step size on the input, in normalised-target loss units. At 0.01 a
    /// dream takes a few hundred epochs of small moves; much larger steps
    /// jump across every argmax margin in the first update, which makes the
    /// noise level irrelevant.
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub grad_tolerance: f64,
    pub noise_upper_bound: f64,
    pub seed: u64,
    pub renoise_each_epoch: bool,
}

impl Default for DreamConfig {
    fn default() -> Self {
        DreamConfig {
            target: 0.0,
            learning_rate: 0.01,
            max_epochs: 500,
            grad_tolerance: 1e-6,
            noise_upper_bound: 0.9,
            seed: 0,
            renoise_each_epoch: false,
        }
    }
}

impl DreamConfig {
    pub fn validate(&self) -> Result<(), DreamError> {
        let bad = |m: &str| Err(DreamError::InvalidConfig(m.to_string()));
        if !self.target.is_finite() {
            return bad("target must be finite");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad("learning_rate must be finite and non-negative");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1");
        }
        if !(self.grad_tolerance.is_finite() && self.grad_tolerance > 0.0) {
            return bad("grad_tolerance must be positive");
        }
        if !(0.0..1.0).contains(&self.noise_upper_bound) {
            return bad("noise_upper_bound must lie in [0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    GradientVanished,
    MaxEpochs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DreamStep {
    pub epoch: usize,
    pub tokens: TokenSequence,
    pub graph: MolecularGraph,
    pub key: CanonicalKey,
    /// Network prediction in raw property units.
    pub predicted: f64,
    /// Squared error in normalised units.
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DreamTrajectory {
    /// Distinct molecules in visiting order; the first is the epoch-0 state.
    pub steps: Vec<DreamStep>,
    pub final_input: OneHotMatrix,
    pub final_predicted: f64,
    pub final_loss: f64,
    /// Number of gradient updates applied.
    pub epochs_run: usize,
    pub termination: Termination,
}

impl DreamTrajectory {
    pub fn initial(&self) -> &DreamStep {
        &self.steps[0]
    }

    pub fn last(&self) -> &DreamStep {
        self.steps.last().expect("trajectory has an epoch-0 step")
    }
}

/// Replaces every zero of an exact one-hot matrix by an independent draw
/// from `[0, upper_bound)`; ones are kept.
pub fn inject_noise(x: &OneHotMatrix, upper_bound: f64, seed: u64) -> Result<OneHotMatrix, DreamError> {
    if !(0.0..1.0).contains(&upper_bound) {
        return Err(DreamError::InvalidConfig("noise upper bound must lie in [0, 1)".into()));
    }
    if !x.is_exact_onehot() {
        return Err(DreamError::NotOneHot);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = x.clone();
    for v in out.values_mut() {
        if *v == 0.0 {
            *v = rng.gen::<f64>() * upper_bound;
        }
    }
    Ok(out)
}

/// Seed for one molecule of a batch, a function of the molecule itself so
/// that results do not depend on its position in the batch.
pub fn item_seed(seed: u64, key: &CanonicalKey) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in key.as_str().bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    seed ^ h
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct Decoded {
    tokens: TokenSequence,
    graph: MolecularGraph,
    key: CanonicalKey,
}

fn decode_matrix(x: &OneHotMatrix) -> Decoded {
    let tokens = from_onehot_argmax(x);
    let graph = decode(&tokens);
    let key = canonical_key(&graph);
    Decoded { tokens, graph, key }
}

struct Run {
    x: OneHotMatrix,
    grad: Vec<f64>,
    seed: u64,
    steps: Vec<DreamStep>,
    last_tokens: TokenSequence,
    predicted: f64,
    loss: f64,
    epochs_run: usize,
    termination: Option<Termination>,
}

impl Run {
    fn observe(&mut self, epoch: usize, pred: f64, grad: Vec<f64>, target: f64, model: &Model, tol: f64) {
        self.predicted = model.normalization.denormalize(pred);
        self.loss = (pred - target) * (pred - target);
        let tokens = from_onehot_argmax(&self.x);
        if self.steps.is_empty() || tokens != self.last_tokens {
            let d = decode_matrix(&self.x);
            if self.steps.last().is_none_or(|s| s.key != d.key) {
                self.steps.push(DreamStep {
                    epoch,
                    tokens: d.tokens,
                    graph: d.graph,
                    key: d.key,
                    predicted: self.predicted,
                    loss: self.loss,
                });
            }
            self.last_tokens = tokens;
        }
        if inf_norm(&grad) < tol {
            self.termination = Some(Termination::GradientVanished);
        }
        self.grad = grad;
    }
}

/// Runs a set of independent dreams in lockstep so the frozen weights are
/// shared across one batched pass per epoch. Each row's arithmetic is
/// independent of the others, so results equal one-at-a-time runs.
fn dream_batch(
    frozen: &FrozenMlp<'_>,
    model: &Model,
    starts: Vec<(OneHotMatrix, u64)>,
    cfg: &DreamConfig,
) -> Result<Vec<DreamTrajectory>, DreamError> {
    let target = model.normalization.normalize(cfg.target);
    let dim = frozen.mlp().input_dim();
    let mut runs: Vec<Run> = Vec::with_capacity(starts.len());
    for (onehot, seed) in starts {
        let x = inject_noise(&onehot, cfg.noise_upper_bound, seed)?;
        runs.push(Run {
            x,
            grad: Vec::new(),
            seed,
            steps: Vec::new(),
            last_tokens: TokenSequence::default(),
            predicted: 0.0,
            loss: 0.0,
            epochs_run: 0,
            termination: None,
        });
    }

    let evaluate = |runs: &mut [Run], epoch: usize| -> Result<(), DreamError> {
        let active: Vec<usize> = (0..runs.len()).filter(|&i| runs[i].termination.is_none()).collect();
        if active.is_empty() {
            return Ok(());
        }
        let mut x = Vec::with_capacity(active.len() * dim);
        for &i in &active {
            x.extend_from_slice(runs[i].x.values());
        }
        let targets = vec![target; active.len()];
        let (pred, grads) = frozen.squared_error_input_gradients(&x, active.len(), &targets)?;
        for (row, &i) in active.iter().enumerate() {
            let g = grads[row * dim..(row + 1) * dim].to_vec();
            runs[i].observe(epoch, pred[row], g, target, model, cfg.grad_tolerance);
        }
        Ok(())
    };

    evaluate(&mut runs, 0)?;
    for epoch in 1..=cfg.max_epochs {
        if runs.iter().all(|r| r.termination.is_some()) {
            break;
        }
        for run in runs.iter_mut().filter(|r| r.termination.is_none()) {
            for (v, g) in run.x.values_mut().iter_mut().zip(&run.grad) {
                *v -= cfg.learning_rate * g;
            }
            if cfg.renoise_each_epoch {
                let current = from_onehot_argmax(&run.x);
                let onehot = to_onehot(&current, model.max_len)?;
                run.x = inject_noise(&onehot, cfg.noise_upper_bound, run.seed.wrapping_add(epoch as u64))?;
            }
            run.epochs_run = epoch;
        }
        evaluate(&mut runs, epoch)?;
    }

    Ok(runs
        .into_iter()
        .map(|r| DreamTrajectory {
            steps: r.steps,
            final_input: r.x,
            final_predicted: r.predicted,
            final_loss: r.loss,
            epochs_run: r.epochs_run,
            termination: r.termination.unwrap_or(Termination::MaxEpochs),
        })
        .collect())
}

fn start_matrix(model: &Model, start: &MolecularGraph) -> Result<OneHotMatrix, DreamError> {
    let tokens = encode(start, model.max_len)?;
    Ok(to_onehot(&tokens, model.max_len)?)
}

/// Dreams one molecule toward `cfg.target`, noise seeded by `cfg.seed`.
pub fn dream(model: &Model, start: &MolecularGraph, cfg: &DreamConfig) -> Result<DreamTrajectory, DreamError> {
    cfg.validate()?;
    let frozen = FrozenMlp::new(&model.mlp);
    let onehot = start_matrix(model, start)?;
    let mut out = dream_batch(&frozen, model, vec![(onehot, cfg.seed)], cfg)?;
    Ok(out.pop().expect("one trajectory per start"))
}

/// Molecules dreamed together per batched pass.
const DREAM_CHUNK: usize = 64;

/// Dreams every molecule independently, each with the seed
/// [`item_seed`]`(cfg.seed, key)`. Output is aligned with the input; a
/// molecule that cannot be encoded yields an error in its slot.
pub fn dream_set(
    model: &Model,
    graphs: &[MolecularGraph],
    cfg: &DreamConfig,
) -> Vec<Result<DreamTrajectory, DreamError>> {
    if let Err(e) = cfg.validate() {
        return graphs
            .iter()
            .map(|_| Err(DreamError::InvalidConfig(e.to_string())))
            .collect();
    }
    let frozen = FrozenMlp::new(&model.mlp);
    let prepared: Vec<Result<(OneHotMatrix, u64), DreamError>> = graphs
        .iter()
        .map(|g| Ok((start_matrix(model, g)?, item_seed(cfg.seed, &canonical_key(g)))))
        .collect();
    let ok: Vec<usize> = (0..graphs.len()).filter(|&i| prepared[i].is_ok()).collect();

    let chunk_results: Vec<Result<Vec<DreamTrajectory>, DreamError>> = ok
        .par_chunks(DREAM_CHUNK)
        .map(|chunk| {
            let starts = chunk
                .iter()
                .map(|&i| prepared[i].as_ref().expect("filtered").clone())
                .collect();
            dream_batch(&frozen, model, starts, cfg)
        })
        .collect();

    let mut results: Vec<Option<Result<DreamTrajectory, DreamError>>> =
        prepared.into_iter().map(|p| p.err().map(Err)).collect();
    for (chunk, res) in ok.chunks(DREAM_CHUNK).zip(chunk_results) {
        match res {
            Ok(trajectories) => {
                for (&i, t) in chunk.iter().zip(trajectories) {
                    results[i] = Some(Ok(t));
                }
            }
            Err(e) => {
                let message = e.to_string();
                for &i in chunk {
                    results[i] = Some(Err(DreamError::InvalidConfig(message.clone())));
                }
            }
        }
    }
    results.into_iter().map(|r| r.expect("every slot filled")).collect()
}

/// One line of the trajectory export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arm: Option<String>,
    pub trajectory: usize,
    pub epoch: usize,
    pub tokens: String,
    pub smiles: String,
    pub predicted: f64,
    pub loss: f64,
}

pub fn step_records(t: &DreamTrajectory, trajectory: usize, arm: Option<&str>) -> Vec<StepRecord> {
    t.steps
        .iter()
        .map(|s| StepRecord {
            arm: arm.map(str::to_string),
            trajectory,
            epoch: s.epoch,
            tokens: s.tokens.to_string(),
            smiles: write_smiles(&s.graph),
            predicted: s.predicted,
            loss: s.loss,
        })
        .collect()
}

/// JSON-lines rendering, one step per line.
pub fn to_jsonl(records: &[StepRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialise"));
        out.push('\n');
    }
    out
}
