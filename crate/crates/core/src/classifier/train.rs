//! Mini-batch Adam training with early stopping on validation accuracy.

use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::data::Examples;
use super::metrics::{argmax, evaluate};
use super::model::{Cnn3, Workspace};
use crate::seed::{self, tag};
use crate::{par, Error, Result};

/// Examples of a batch are spread over this many gradient accumulators,
/// summed in a fixed order afterwards. The partition does not depend on the
/// thread count, so parallel and sequential runs produce identical weights.
const GRAD_CHUNKS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LrSchedule {
    Constant,
    /// Half-cosine decay from the base rate to zero over `epochs`.
    Cosine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Stop after this many epochs without a new best validation accuracy.
    pub patience: usize,
    pub seed: u64,
    pub schedule: LrSchedule,
    /// Decoupled weight decay (AdamW); 0 disables it.
    pub weight_decay: f64,
    /// Run everything on the calling thread.
    pub deterministic: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 32,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            patience: 8,
            seed: 0,
            schedule: LrSchedule::Cosine,
            weight_decay: 0.0,
            deterministic: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.patience == 0 {
            return Err(Error::invalid(
                "TrainConfig",
                "epochs, batch_size and patience must be positive",
            ));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::invalid("learning_rate", "must be finite and >= 0"));
        }
        if !(0.0..1.0).contains(&self.beta1)
            || !(0.0..1.0).contains(&self.beta2)
            || self.epsilon <= 0.0
        {
            return Err(Error::invalid(
                "TrainConfig",
                "Adam moments must lie in [0, 1) and epsilon > 0",
            ));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::invalid("weight_decay", "must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        match self.schedule {
            LrSchedule::Constant => self.learning_rate,
            LrSchedule::Cosine => {
                let t = epoch as f64 / self.epochs as f64;
                self.learning_rate * 0.5 * (1.0 + (std::f64::consts::PI * t).cos())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub learning_rate: f64,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub stopped_early: bool,
}

/// Adam state over the flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    m: Vec<f32>,
    v: Vec<f32>,
    step: i32,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    weight_decay: f64,
}

impl Adam {
    pub fn new(n: usize, cfg: &TrainConfig) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            epsilon: cfg.epsilon,
            weight_decay: cfg.weight_decay,
        }
    }

    pub fn update(&mut self, params: &mut [f32], grad: &[f32], lr: f64) {
        self.step += 1;
        let b1 = self.beta1 as f32;
        let b2 = self.beta2 as f32;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        // fold both bias corrections into the step size
        let step = (lr * c2.sqrt() / c1) as f32;
        let eps = (self.epsilon * c2.sqrt()) as f32;
        let decay = (lr * self.weight_decay) as f32;
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grad)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= step * *m / (v.sqrt() + eps) + decay * *p;
        }
    }
}

struct BatchResult {
    grad: Vec<f32>,
    loss_sum: f64,
    correct: usize,
}

/// Mean-loss gradient over the examples `idx` of `data`.
fn batch_gradient(
    model: &Cnn3<f32>,
    data: &Examples,
    idx: &[usize],
    parallel: bool,
) -> Result<BatchResult> {
    let scale = 1.0 / idx.len() as f32;
    let chunk = idx.len().div_ceil(GRAD_CHUNKS).max(1);
    let chunks: Vec<&[usize]> = idx.chunks(chunk).collect();
    let parts = par::map(&chunks, parallel, |chunk| -> Result<BatchResult> {
        let mut ws = Workspace::new(model.spec());
        let mut grad = vec![0f32; model.num_params()];
        let mut loss_sum = 0.0;
        let mut correct = 0;
        for &i in *chunk {
            let label = data.labels[i];
            let loss =
                model.accumulate_gradient(data.input(i), label, scale, &mut ws, &mut grad)?;
            loss_sum += loss as f64;
            correct += usize::from(argmax(ws.probs()) == label);
        }
        Ok(BatchResult {
            grad,
            loss_sum,
            correct,
        })
    });
    let mut parts = parts.into_iter();
    let mut total = parts.next().expect("non-empty batch")?;
    for p in parts {
        let p = p?;
        for (a, b) in total.grad.iter_mut().zip(&p.grad) {
            *a += *b;
        }
        total.loss_sum += p.loss_sum;
        total.correct += p.correct;
    }
    Ok(total)
}

fn check_data(model: &Cnn3<f32>, data: &Examples, what: &'static str) -> Result<()> {
    if data.is_empty() {
        return Err(Error::invalid(what, "split must not be empty"));
    }
    if data.n_rows != model.spec().n_rows {
        return Err(Error::Shape(format!(
            "{what} split has {} rows per session, model expects {}",
            data.n_rows,
            model.spec().n_rows
        )));
    }
    match data.max_label() {
        Some(l) if l >= model.spec().num_classes => Err(Error::Shape(format!(
            "{what} label {l} outside [0, {})",
            model.spec().num_classes
        ))),
        _ => Ok(()),
    }
}

/// Trains `model` and returns the weights with the best validation accuracy.
pub fn train(
    model: Cnn3<f32>,
    train_set: &Examples,
    val_set: &Examples,
    cfg: &TrainConfig,
) -> Result<(Cnn3<f32>, TrainHistory)> {
    train_with(model, train_set, val_set, cfg, |_| {})
}

/// [`train`] with a callback after every epoch.
pub fn train_with(
    mut model: Cnn3<f32>,
    train_set: &Examples,
    val_set: &Examples,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<(Cnn3<f32>, TrainHistory)> {
    cfg.validate()?;
    check_data(&model, train_set, "train")?;
    check_data(&model, val_set, "validation")?;
    let parallel = !cfg.deterministic;

    let mut adam = Adam::new(model.num_params(), cfg);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = TrainHistory {
        best_val_accuracy: -1.0,
        ..TrainHistory::default()
    };
    let mut best = model.clone();

    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        let lr = cfg.lr_at(epoch);
        let mut rng = seed::derived_stream(cfg.seed, &[tag::SHUFFLE, epoch as u64]);
        order.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        let mut correct = 0;
        for batch in order.chunks(cfg.batch_size) {
            let r = batch_gradient(&model, train_set, batch, parallel)?;
            if !r.loss_sum.is_finite() || r.grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Training {
                    epoch,
                    loss: r.loss_sum / batch.len() as f64,
                });
            }
            loss_sum += r.loss_sum;
            correct += r.correct;
            adam.update(model.params_mut(), &r.grad, lr);
        }
        if model.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::Training {
                epoch,
                loss: f64::NAN,
            });
        }

        let val = evaluate(&model, val_set, parallel)?;
        let stats = EpochStats {
            epoch,
            learning_rate: lr,
            train_loss: loss_sum / train_set.len() as f64,
            train_accuracy: correct as f64 / train_set.len() as f64,
            val_accuracy: val.accuracy,
            seconds: started.elapsed().as_secs_f64(),
        };
        on_epoch(&stats);
        history.epochs.push(stats);

        if val.accuracy > history.best_val_accuracy {
            history.best_val_accuracy = val.accuracy;
            history.best_epoch = epoch;
            best = model.clone();
        } else if epoch - history.best_epoch >= cfg.patience {
            history.stopped_early = true;
            break;
        }
    }
    Ok((best, history))
}
