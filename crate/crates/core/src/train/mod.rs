//! Minibatch Adadelta training with early stopping on validation loss.

mod adadelta;
mod report;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{backward, forward, logits, GcnParams};
use crate::rng::Rng;
use crate::tensor::{bce_loss, sigmoid};
use crate::text::EncodedExample;

pub use adadelta::{adadelta_step, AdadeltaState, DEFAULT_EPS, DEFAULT_RHO};
pub use report::{EpochRecord, TrainReport};

pub const DEFAULT_EPOCHS: usize = 50;
pub const DEFAULT_PATIENCE: usize = 10;
pub const DEFAULT_MIN_DELTA: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    /// `None` trains for the full epoch budget.
    pub patience: Option<usize>,
    pub min_delta: f64,
    pub rho: f64,
    pub eps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 16,
            epochs: DEFAULT_EPOCHS,
            patience: Some(DEFAULT_PATIENCE),
            min_delta: DEFAULT_MIN_DELTA,
            rho: DEFAULT_RHO,
            eps: DEFAULT_EPS,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if self.patience == Some(0) {
            return Err(Error::invalid("patience must be at least 1"));
        }
        if !(self.min_delta >= 0.0) {
            return Err(Error::invalid("min_delta must be nonnegative"));
        }
        Ok(())
    }

    /// Seed of the example shuffle for a 1-based epoch.
    pub fn shuffle_seed(&self, epoch: usize) -> u64 {
        self.seed ^ epoch as u64
    }
}

/// Patience counter. An epoch improves when its loss is below the best so far
/// by more than `min_delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    patience: Option<usize>,
    min_delta: f64,
    best_loss: f64,
    best_epoch: usize,
    stale: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

impl EarlyStopping {
    pub fn new(patience: Option<usize>, min_delta: f64) -> Self {
        Self {
            patience,
            min_delta,
            best_loss: f64::INFINITY,
            best_epoch: 0,
            stale: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, loss: f64) -> StopDecision {
        if loss < self.best_loss - self.min_delta {
            self.best_loss = loss;
            self.best_epoch = epoch;
            self.stale = 0;
            return StopDecision::Improved;
        }
        self.stale += 1;
        match self.patience {
            Some(p) if self.stale >= p => StopDecision::Stop,
            _ => StopDecision::Continue,
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best_loss
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub loss: f64,
}

/// Batch boundaries for `n` examples: full batches then one ragged tail.
pub fn batch_ranges(n: usize, batch_size: usize) -> Vec<std::ops::Range<usize>> {
    (0..n)
        .step_by(batch_size.max(1))
        .map(|s| s..(s + batch_size).min(n))
        .collect()
}

/// One pass over `data` in an order shuffled by `shuffle_seed`. Dropout draws
/// come from `rng`. Returns the mean training loss over all examples, which is
/// the batch-size-weighted mean of per-batch losses.
pub fn train_epoch(
    params: &mut GcnParams,
    state: &mut AdadeltaState,
    data: &[EncodedExample],
    batch_size: usize,
    epoch: usize,
    shuffle_seed: u64,
    rng: &mut Rng,
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::invalid("empty training split"));
    }
    if batch_size == 0 {
        return Err(Error::invalid("batch size must be at least 1"));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    Rng::new(shuffle_seed).shuffle(&mut order);

    let mut total = 0.0;
    for (b, range) in batch_ranges(data.len(), batch_size).into_iter().enumerate() {
        let batch: Vec<&EncodedExample> = order[range].iter().map(|&i| &data[i]).collect();
        let labels: Vec<u8> = batch.iter().map(|e| e.label).collect();
        let (probs, cache) = forward(params, &batch, true, rng)?;
        let mut batch_loss = 0.0;
        for (&p, &y) in probs.iter().zip(&labels) {
            batch_loss += bce_loss(p, f64::from(y))?.0;
        }
        if !batch_loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                batch: b + 1,
                loss: batch_loss,
            });
        }
        total += batch_loss;
        let grads = backward(params, &cache, &labels)?;
        if !grads.tensors().iter().all(|t| t.is_finite()) {
            return Err(Error::NonFiniteLoss {
                epoch,
                batch: b + 1,
                loss: f64::NAN,
            });
        }
        state.apply(params, &grads)?;
    }
    Ok(total / data.len() as f64)
}

/// Inference-mode accuracy and mean cross-entropy.
pub fn evaluate(params: &GcnParams, data: &[EncodedExample]) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(Error::invalid("evaluation on an empty split"));
    }
    let mut correct = 0usize;
    let mut loss = 0.0;
    for chunk in data.chunks(256) {
        for (z, ex) in logits(params, chunk)?.into_iter().zip(chunk) {
            correct += usize::from(u8::from(z >= 0.0) == ex.label);
            loss += bce_loss(sigmoid(z), f64::from(ex.label))?.0;
        }
    }
    let n = data.len() as f64;
    Ok(Evaluation {
        accuracy: correct as f64 / n,
        loss: loss / n,
    })
}

/// Trains until the epoch budget or patience runs out and returns the
/// parameters from the epoch with the lowest validation loss.
pub fn fit(
    mut params: GcnParams,
    train: &[EncodedExample],
    val: &[EncodedExample],
    config: &TrainConfig,
) -> Result<(GcnParams, TrainReport)> {
    config.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::invalid("fit needs non-empty train and validation splits"));
    }
    let mut state = AdadeltaState::for_params(&params, config.rho, config.eps)?;
    let mut dropout_rng = Rng::new(config.seed).fork(1);
    let mut stopper = EarlyStopping::new(config.patience, config.min_delta);
    let mut best = params.clone();
    let mut records = Vec::new();
    let mut early_stopped = false;

    for epoch in 1..=config.epochs {
        let start = Instant::now();
        let train_loss = train_epoch(
            &mut params,
            &mut state,
            train,
            config.batch_size,
            epoch,
            config.shuffle_seed(epoch),
            &mut dropout_rng,
        )?;
        let seconds = start.elapsed().as_secs_f64();
        let eval = evaluate(&params, val)?;
        if !eval.loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                batch: 0,
                loss: eval.loss,
            });
        }
        log::info!(
            "epoch {epoch}: train loss {train_loss:.5}, val loss {:.5}, val acc {:.4}, {seconds:.2}s",
            eval.loss,
            eval.accuracy
        );
        records.push(EpochRecord {
            epoch,
            train_loss,
            val_loss: eval.loss,
            val_accuracy: eval.accuracy,
            seconds,
        });
        match stopper.observe(epoch, eval.loss) {
            StopDecision::Improved => best = params.clone(),
            StopDecision::Continue => {}
            StopDecision::Stop => {
                early_stopped = true;
                break;
            }
        }
    }

    let report = TrainReport {
        stopped_epoch: records.len(),
        best_epoch: stopper.best_epoch(),
        best_val_loss: stopper.best_loss(),
        early_stopped,
        epochs: records,
    };
    Ok((best, report))
}
