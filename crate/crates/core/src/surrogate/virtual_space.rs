//! The learned stand-in for the reactor: one recurrent predictor for `[C]`,
//! one for `[D]`, each fed `(u_t, y_t)` and predicting `y_{t+1}`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lstm::{CarriedState, RecurrentModel};
use super::train::{train_epochs, Sequence, TrainerState, TrainingConfig};
use crate::dataset::EpisodeRecord;
use crate::error::{Result, RvlError};
use crate::provenance::Provenance;
use crate::rng::rng_from;

pub const CHECKPOINT_VERSION: u32 = 1;
pub const INPUT_SIZE: usize = 2;

/// Multiplicative scales mapping physical values into the model's range;
/// offsets are zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Normalization {
    pub u_scale: f64,
    pub c_scale: f64,
    pub d_scale: f64,
}

impl Default for Normalization {
    fn default() -> Self {
        Self {
            u_scale: 1.0 / 0.009,
            c_scale: 1.0 / 0.1,
            d_scale: 1.0 / 0.1,
        }
    }
}

/// Which product a predictor models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Product {
    C,
    D,
}

impl Normalization {
    fn scale(&self, product: Product) -> f64 {
        match product {
            Product::C => self.c_scale,
            Product::D => self.d_scale,
        }
    }

    /// Teacher-forced training sequence for one product of one episode.
    pub fn sequence(&self, ep: &EpisodeRecord, product: Product) -> Sequence {
        let ys = match product {
            Product::C => &ep.c,
            Product::D => &ep.d,
        };
        let s = self.scale(product);
        let inputs = ep
            .u
            .iter()
            .zip(ys)
            .flat_map(|(u, y)| [u * self.u_scale, y * s])
            .collect();
        let targets = ys[1..].iter().map(|y| y * s).collect();
        Sequence { inputs, targets }
    }
}

/// Carried state of both predictors plus their latest outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct VirtualCarry {
    pub state_c: CarriedState,
    pub state_d: CarriedState,
    /// Latest `[C]`, `[D]` in physical units; fed back as the next input.
    pub c: f64,
    pub d: f64,
    /// Cell evaluations performed through this carry and its ancestors.
    pub cell_evals: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VirtualSpace {
    pub model_c: RecurrentModel,
    pub model_d: RecurrentModel,
    pub norm: Normalization,
}

struct Scratch {
    gates: Vec<f64>,
}

impl VirtualSpace {
    pub fn new(model_c: RecurrentModel, model_d: RecurrentModel, norm: Normalization) -> Result<Self> {
        for m in [&model_c, &model_d] {
            m.validate()?;
            if m.input_size != INPUT_SIZE {
                return Err(RvlError::Shape {
                    what: "predictor input size",
                    expected: INPUT_SIZE,
                    actual: m.input_size,
                });
            }
        }
        Ok(Self {
            model_c,
            model_d,
            norm,
        })
    }

    /// Fresh carry positioned at the start of a batch with products `c0`, `d0`.
    pub fn reset(&self, c0: f64, d0: f64) -> VirtualCarry {
        VirtualCarry {
            state_c: CarriedState::zeros(self.model_c.hidden_size),
            state_d: CarriedState::zeros(self.model_d.hidden_size),
            c: c0,
            d: d0,
            cell_evals: 0,
        }
    }

    fn scratch(&self) -> Scratch {
        Scratch {
            gates: vec![0.0; 4 * self.model_c.hidden_size.max(self.model_d.hidden_size)],
        }
    }

    fn advance_with(&self, carry: &mut VirtualCarry, u: f64, scratch: &mut Scratch) -> (f64, f64) {
        let n = &self.norm;
        let xc = [u * n.u_scale, carry.c * n.c_scale];
        let xd = [u * n.u_scale, carry.d * n.d_scale];
        let hc = self.model_c.hidden_size;
        let hd = self.model_d.hidden_size;
        let yc = self
            .model_c
            .step_in_place(&xc, &mut carry.state_c, &mut scratch.gates[..4 * hc]);
        let yd = self
            .model_d
            .step_in_place(&xd, &mut carry.state_d, &mut scratch.gates[..4 * hd]);
        carry.c = yc / n.c_scale;
        carry.d = yd / n.d_scale;
        carry.cell_evals += 2;
        (carry.c, carry.d)
    }

    /// Advance both predictors one control step under feed `u`, feeding their
    /// own outputs back. Returns the predicted `([C], [D])`.
    pub fn advance(&self, carry: &mut VirtualCarry, u: f64) -> (f64, f64) {
        let mut scratch = self.scratch();
        self.advance_with(carry, u, &mut scratch)
    }

    /// Pure form of [`VirtualSpace::advance`].
    pub fn step_virtual(&self, carry: &VirtualCarry, u: f64) -> (f64, f64, VirtualCarry) {
        let mut next = carry.clone();
        let (c, d) = self.advance(&mut next, u);
        (c, d, next)
    }

    /// Advance under feed `u`, then overwrite the fed-back outputs with the
    /// measured `[C]`, `[D]` so the carry tracks a real batch.
    pub fn observe(&self, carry: &mut VirtualCarry, u: f64, c_measured: f64, d_measured: f64) {
        self.advance(carry, u);
        carry.c = c_measured;
        carry.d = d_measured;
    }

    /// Closed-loop prediction of both series from `(c0, d0)` under `controls`.
    pub fn rollout_predict(&self, controls: &[f64], c0: f64, d0: f64) -> (Vec<f64>, Vec<f64>) {
        let mut carry = self.reset(c0, d0);
        let mut scratch = self.scratch();
        let mut cs = Vec::with_capacity(controls.len() + 1);
        let mut ds = Vec::with_capacity(controls.len() + 1);
        cs.push(c0);
        ds.push(d0);
        for &u in controls {
            let (c, d) = self.advance_with(&mut carry, u, &mut scratch);
            cs.push(c);
            ds.push(d);
        }
        (cs, ds)
    }
}

/// Result of fitting one predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: RecurrentModel,
    pub trainer: TrainerState,
}

/// Fit one product's predictor on `train` episodes for `epochs` epochs,
/// continuing from `resume` when given.
pub fn fit_product(
    train: &[EpisodeRecord],
    product: Product,
    norm: &Normalization,
    config: &TrainingConfig,
    epochs: usize,
    resume: Option<FitResult>,
) -> Result<FitResult> {
    let data: Vec<Sequence> = train.iter().map(|ep| norm.sequence(ep, product)).collect();
    let (mut model, mut trainer) = match resume {
        Some(r) => {
            if r.model.hidden_size != config.hidden_size {
                return Err(RvlError::Shape {
                    what: "resumed hidden size",
                    expected: config.hidden_size,
                    actual: r.model.hidden_size,
                });
            }
            (r.model, r.trainer)
        }
        None => (
            RecurrentModel::init(INPUT_SIZE, config.hidden_size, &mut rng_from(config.seed)),
            TrainerState::default(),
        ),
    };
    train_epochs(&mut model, &data, config, &mut trainer, epochs)?;
    Ok(FitResult { model, trainer })
}

/// Per-time-index RMSE across a set of series, and its mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseReport {
    pub per_step: Vec<f64>,
    pub mean: f64,
}

pub fn rmse(predicted: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<RmseReport> {
    if predicted.len() != truth.len() || predicted.is_empty() {
        return Err(RvlError::LengthMismatch {
            left: predicted.len(),
            right: truth.len(),
        });
    }
    let len = truth[0].len();
    for (p, t) in predicted.iter().zip(truth) {
        if p.len() != len || t.len() != len {
            return Err(RvlError::LengthMismatch {
                left: p.len(),
                right: t.len(),
            });
        }
    }
    let n = truth.len() as f64;
    let per_step: Vec<f64> = (0..len)
        .map(|t| {
            let sq: f64 = predicted
                .iter()
                .zip(truth)
                .map(|(p, y)| (p[t] - y[t]) * (p[t] - y[t]))
                .sum();
            (sq / n).sqrt()
        })
        .collect();
    let mean = per_step.iter().sum::<f64>() / len.max(1) as f64;
    Ok(RmseReport { per_step, mean })
}

/// Closed-loop RMSE of both predictors over `episodes`.
pub fn evaluate_rmse(space: &VirtualSpace, episodes: &[EpisodeRecord]) -> Result<(RmseReport, RmseReport)> {
    let (pc, pd): (Vec<Vec<f64>>, Vec<Vec<f64>>) = episodes
        .par_iter()
        .map(|ep| space.rollout_predict(&ep.u, ep.c[0], ep.d[0]))
        .unzip();
    let tc: Vec<Vec<f64>> = episodes.iter().map(|e| e.c.clone()).collect();
    let td: Vec<Vec<f64>> = episodes.iter().map(|e| e.d.clone()).collect();
    Ok((rmse(&pc, &tc)?, rmse(&pd, &td)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelRecord {
    pub input_size: usize,
    pub hidden_size: usize,
    pub config: TrainingConfig,
    pub tensors: Vec<(String, Vec<f64>)>,
    pub trainer: TrainerState,
}

impl ModelRecord {
    pub fn from_fit(fit: &FitResult, config: &TrainingConfig) -> Self {
        Self {
            input_size: fit.model.input_size,
            hidden_size: fit.model.hidden_size,
            config: *config,
            tensors: fit
                .model
                .tensors()
                .into_iter()
                .map(|(n, v)| (n, v.to_vec()))
                .collect(),
            trainer: fit.trainer.clone(),
        }
    }

    pub fn to_fit(&self) -> Result<FitResult> {
        Ok(FitResult {
            model: RecurrentModel::from_tensors(self.input_size, self.hidden_size, &self.tensors)?,
            trainer: self.trainer.clone(),
        })
    }
}

/// Both predictors, normalization and training state in one JSON record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VirtualSpaceCheckpoint {
    pub schema_version: u32,
    pub normalization: Normalization,
    pub model_c: ModelRecord,
    pub model_d: ModelRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl VirtualSpaceCheckpoint {
    pub fn to_space(&self) -> Result<VirtualSpace> {
        if self.schema_version != CHECKPOINT_VERSION {
            return Err(RvlError::InvalidParameter(format!(
                "unsupported checkpoint version {}",
                self.schema_version
            )));
        }
        VirtualSpace::new(
            self.model_c.to_fit()?.model,
            self.model_d.to_fit()?.model,
            self.normalization,
        )
    }
}
