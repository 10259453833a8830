use serde::{Deserialize, Serialize};

use crate::clipgen::{ClipSample, Corpus, Split};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::tensor::{Graph, Optimizer, OptimizerConfig, ParamId, Tensor};
use crate::toymodel::ToyVqaModel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Samples per forward/backward micro-batch.
    pub batch: usize,
    /// Micro-batches accumulated per optimiser step.
    pub grad_accum: usize,
    pub optimizer: OptimizerConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch: 1,
            grad_accum: 8,
            optimizer: OptimizerConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 || self.grad_accum == 0 {
            return Err(Error::Config(
                "batch and grad_accum must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    /// 0 is the untrained starting point.
    pub epoch: usize,
    pub train_loss: Option<f64>,
    pub val_loss: f64,
    pub optimizer_steps: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub epochs: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

/// Mean cross-entropy of the model's answers over `samples`.
pub fn mean_loss<'a>(
    model: &ToyVqaModel,
    samples: impl IntoIterator<Item = &'a ClipSample>,
) -> Result<f64> {
    let (mut total, mut n) = (0.0, 0usize);
    for s in samples {
        let mut g = Graph::with_params(&model.store);
        let loss = model.loss(&mut g, &s.features, &s.question_tokens, s.answer.index())?;
        total += g.value(loss).item();
        n += 1;
    }
    if n == 0 {
        return Err(Error::Config("loss over an empty sample set".into()));
    }
    Ok(total / n as f64)
}

fn snapshot(model: &ToyVqaModel) -> Vec<(ParamId, Tensor)> {
    model
        .store
        .trainable_ids()
        .into_iter()
        .map(|id| (id, model.store.value(id).clone()))
        .collect()
}

fn restore(model: &mut ToyVqaModel, state: Vec<(ParamId, Tensor)>) {
    for (id, t) in state {
        *model.store.value_mut(id) = t;
    }
}

/// Forward/backward over one micro-batch, adding the gradient of the
/// batch-mean loss into the store. Returns the summed loss.
fn accumulate_batch(
    model: &mut ToyVqaModel,
    batch: &[&ClipSample],
    epoch: usize,
    seed: u64,
) -> Result<f64> {
    let (grads, total) = {
        let mut g = Graph::with_params(&model.store);
        let mut losses = Vec::with_capacity(batch.len());
        for s in batch {
            let l = model.loss(&mut g, &s.features, &s.question_tokens, s.answer.index())?;
            let v = g.value(l).item();
            if !v.is_finite() {
                return Err(Error::Divergence(format!(
                    "loss {v} at epoch {epoch}, sample {} (seed {seed})",
                    s.id
                )));
            }
            losses.push(g.reshape(l, &[1])?);
        }
        let stacked = g.concat(&losses, 0)?;
        let total = g.value(stacked).data().iter().sum::<f64>();
        let loss = g.mean(stacked, 0)?;
        (g.backward(loss)?, total)
    };
    model.store.accumulate(&grads);
    Ok(total)
}

/// Adapter training: shuffled epochs, an optimiser step every `grad_accum`
/// micro-batches on the mean accumulated gradient, validation loss after
/// every epoch. The model ends holding the weights with the lowest
/// validation loss; `on_improve` runs each time that minimum drops.
pub fn train<F>(
    model: &mut ToyVqaModel,
    corpus: &Corpus,
    cfg: &TrainConfig,
    seed: u64,
    mut on_improve: F,
) -> Result<TrainOutcome>
where
    F: FnMut(&ToyVqaModel, &EpochLog) -> Result<()>,
{
    cfg.validate()?;
    let train: Vec<&ClipSample> = corpus.split(Split::Train).collect();
    let val: Vec<&ClipSample> = corpus.split(Split::Val).collect();
    if train.is_empty() {
        return Err(Error::Config("training split is empty".into()));
    }
    let mut opt = Optimizer::new(cfg.optimizer.clone())?;
    let shuffle = SplitMix64::new(seed).substream("shuffle");
    model.store.zero_grads();

    let start = EpochLog {
        epoch: 0,
        train_loss: None,
        val_loss: mean_loss(model, val.iter().copied())?,
        optimizer_steps: 0,
    };
    on_improve(model, &start)?;
    let (mut best_epoch, mut best_val) = (0, start.val_loss);
    let mut best_state = snapshot(model);
    let mut logs = vec![start];

    for epoch in 1..=cfg.epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        SplitMix64::new(crate::rng::derive_seed(
            shuffle.seed(),
            "epoch",
            epoch as u64,
        ))
        .shuffle(&mut order);
        let (mut total, mut pending) = (0.0, 0usize);
        for chunk in order.chunks(cfg.batch) {
            let batch: Vec<&ClipSample> = chunk.iter().map(|&i| train[i]).collect();
            total += accumulate_batch(model, &batch, epoch, seed)?;
            pending += 1;
            if pending == cfg.grad_accum {
                opt.step(&mut model.store, 1.0 / pending as f64);
                pending = 0;
            }
        }
        if pending > 0 {
            opt.step(&mut model.store, 1.0 / pending as f64);
        }
        let log = EpochLog {
            epoch,
            train_loss: Some(total / train.len() as f64),
            val_loss: mean_loss(model, val.iter().copied())?,
            optimizer_steps: opt.steps(),
        };
        if log.val_loss < best_val {
            best_val = log.val_loss;
            best_epoch = epoch;
            best_state = snapshot(model);
            on_improve(model, &log)?;
        }
        logs.push(log);
    }
    restore(model, best_state);
    Ok(TrainOutcome {
        epochs: logs,
        best_epoch,
        best_val_loss: best_val,
    })
}
