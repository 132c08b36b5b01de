//! Mini-batch training of one recurrent predictor with teacher forcing.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lstm::RecurrentModel;
use crate::error::{Result, RvlError};
use crate::rng::{mix, rng_from};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Optimizer {
    /// Plain gradient descent.
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub const ADAM: Optimizer = Optimizer::Adam {
        beta1: 0.9,
        beta2: 0.999,
        eps: 1e-8,
    };
}

/// Per-epoch learning-rate multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LrSchedule {
    #[default]
    Constant,
    /// Half-cosine from 1 down to `floor` over the configured epochs.
    Cosine { floor: f64 },
}

impl LrSchedule {
    pub fn factor(&self, epoch: usize, total: usize) -> f64 {
        match *self {
            LrSchedule::Constant => 1.0,
            LrSchedule::Cosine { floor } => {
                let x = (epoch as f64 / total.max(1) as f64).min(1.0);
                floor + (1.0 - floor) * 0.5 * (1.0 + (std::f64::consts::PI * x).cos())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    pub hidden_size: usize,
    pub mini_batch: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Global gradient-norm ceiling; `0` disables clipping.
    pub clip_norm: f64,
    pub optimizer: Optimizer,
    #[serde(default)]
    pub schedule: LrSchedule,
    /// Initialization and shuffling seed; pipelines derive it from the master seed.
    #[serde(default)]
    pub seed: u64,
}

impl TrainingConfig {
    /// 100 hidden units, batches of 20, 3000 epochs.
    pub fn product_c() -> Self {
        Self {
            hidden_size: 100,
            mini_batch: 20,
            epochs: 3000,
            learning_rate: 0.003,
            clip_norm: 1.0,
            optimizer: Optimizer::ADAM,
            schedule: LrSchedule::Cosine { floor: 0.05 },
            seed: 0,
        }
    }

    /// 200 hidden units, 6000 epochs.
    pub fn product_d() -> Self {
        Self {
            hidden_size: 200,
            epochs: 6000,
            ..Self::product_c()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_size == 0 || self.mini_batch == 0 || self.epochs == 0 {
            return Err(RvlError::InvalidParameter(
                "hidden_size, mini_batch and epochs must be at least 1".into(),
            ));
        }
        if let LrSchedule::Cosine { floor } = self.schedule {
            if !(0.0..=1.0).contains(&floor) {
                return Err(RvlError::InvalidParameter("cosine floor must lie in [0, 1]".into()));
            }
        }
        if !(self.learning_rate > 0.0) || !(self.clip_norm >= 0.0) {
            return Err(RvlError::InvalidParameter(
                "learning_rate must be positive and clip_norm non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// One normalized training sequence: `inputs` is `T x I`, `targets` has `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub inputs: Vec<f64>,
    pub targets: Vec<f64>,
}

/// Optimizer moments and epoch counter, enough to resume a run exactly.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainerState {
    pub epochs_done: usize,
    pub step: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub m: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub v: Vec<f64>,
    pub loss_curve: Vec<f64>,
}

fn batch_gradient(model: &RecurrentModel, batch: &[&Sequence]) -> (f64, Vec<f64>) {
    let n_params = model.params.len();
    // per-sequence gradients in parallel, summed in batch order for determinism
    let parts: Vec<(f64, Vec<f64>)> = batch
        .par_iter()
        .map(|s| {
            let mut g = vec![0.0; n_params];
            let loss = model.sequence_loss_grad(&s.inputs, &s.targets, &mut g);
            (loss, g)
        })
        .collect();
    let mut grad = vec![0.0; n_params];
    let mut loss = 0.0;
    for (l, g) in &parts {
        loss += l;
        for (acc, x) in grad.iter_mut().zip(g) {
            *acc += x;
        }
    }
    let inv = 1.0 / batch.len() as f64;
    grad.iter_mut().for_each(|g| *g *= inv);
    (loss * inv, grad)
}

fn clip(grad: &mut [f64], max_norm: f64) {
    if max_norm <= 0.0 {
        return;
    }
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= s);
    }
}

/// Run `epochs` more epochs from `state`, appending to its loss curve.
pub fn train_epochs(
    model: &mut RecurrentModel,
    data: &[Sequence],
    config: &TrainingConfig,
    state: &mut TrainerState,
    epochs: usize,
) -> Result<()> {
    config.validate()?;
    if data.is_empty() {
        return Err(RvlError::InvalidParameter("training set is empty".into()));
    }
    if let Optimizer::Adam { .. } = config.optimizer {
        if state.m.len() != model.params.len() {
            state.m = vec![0.0; model.params.len()];
            state.v = vec![0.0; model.params.len()];
        }
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    for _ in 0..epochs {
        let epoch = state.epochs_done;
        order.sort_unstable();
        order.shuffle(&mut rng_from(mix(config.seed, epoch as u64)));
        let lr = config.learning_rate * config.schedule.factor(epoch, config.epochs);
        let mut epoch_loss = 0.0;
        let mut n_batches = 0usize;
        for chunk in order.chunks(config.mini_batch) {
            let batch: Vec<&Sequence> = chunk.iter().map(|&i| &data[i]).collect();
            let (loss, mut grad) = batch_gradient(model, &batch);
            if !loss.is_finite() {
                return Err(RvlError::TrainingDiverged { epoch, loss });
            }
            clip(&mut grad, config.clip_norm);
            state.step += 1;
            match config.optimizer {
                Optimizer::Sgd => {
                    for (p, g) in model.params.iter_mut().zip(&grad) {
                        *p -= lr * g;
                    }
                }
                Optimizer::Adam { beta1, beta2, eps } => {
                    let t = state.step as i32;
                    let c1 = 1.0 - beta1.powi(t);
                    let c2 = 1.0 - beta2.powi(t);
                    for (((p, g), m), v) in model
                        .params
                        .iter_mut()
                        .zip(&grad)
                        .zip(state.m.iter_mut())
                        .zip(state.v.iter_mut())
                    {
                        *m = beta1 * *m + (1.0 - beta1) * g;
                        *v = beta2 * *v + (1.0 - beta2) * g * g;
                        *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                    }
                }
            }
            epoch_loss += loss;
            n_batches += 1;
        }
        let mean = epoch_loss / n_batches as f64;
        if !mean.is_finite() || model.params.iter().any(|p| !p.is_finite()) {
            return Err(RvlError::TrainingDiverged { epoch, loss: mean });
        }
        state.loss_curve.push(mean);
        state.epochs_done += 1;
    }
    Ok(())
}

/// Train from scratch for `config.epochs` epochs.
pub fn train(
    model: &mut RecurrentModel,
    data: &[Sequence],
    config: &TrainingConfig,
) -> Result<TrainerState> {
    let mut state = TrainerState::default();
    train_epochs(model, data, config, &mut state, config.epochs)?;
    Ok(state)
}

/// Moving average over `window` epochs.
pub fn smooth(curve: &[f64], window: usize) -> Vec<f64> {
    if window == 0 || curve.len() < window {
        return Vec::new();
    }
    curve
        .windows(window)
        .map(|w| w.iter().sum::<f64>() / window as f64)
        .collect()
}

/// `epoch,loss` CSV.
pub fn loss_curve_csv(curve: &[f64]) -> String {
    let mut out = String::from("epoch,loss\n");
    for (i, l) in curve.iter().enumerate() {
        out.push_str(&format!("{},{:e}\n", i + 1, l));
    }
    out
}
