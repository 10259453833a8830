use serde::{Deserialize, Serialize};

use super::{argmax, ToyVqaModel};
use crate::clipgen::{Attribute, ClipSample, Corpus, Split, UNK_ID};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::tensor::{Graph, Optimizer, OptimizerConfig, ParamId, Tensor, Var};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainConfig {
    /// Single-sample optimiser steps.
    pub steps: usize,
    pub lr: f64,
    /// Chance of replacing each question token with UNK for the attribute
    /// task, so the encoder keys on content words.
    pub unk_rate: f64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            steps: 3000,
            lr: 1e-3,
            unk_rate: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PretrainReport {
    pub steps: usize,
    /// Mean training loss over each block of 100 steps.
    pub loss_curve: Vec<f64>,
    /// Held-out per-frame tool and illumination accuracy.
    pub frame_accuracy: f64,
    /// Held-out accuracy at naming the attribute a question asks about.
    pub question_accuracy: f64,
    pub frozen_digest: String,
}

struct Heads {
    frame_w: ParamId,
    frame_b: ParamId,
    question_w: ParamId,
    question_b: ParamId,
}

/// `[T, 4]` frame logits: tool (absent, present), then illumination
/// (white, narrow band).
fn frame_logits(
    model: &ToyVqaModel,
    heads: &Heads,
    g: &mut Graph<'_>,
    clip: &[f32],
) -> Result<Var> {
    let h = model.vision_tokens(g, clip)?;
    let s = g.shape(h).to_vec();
    let pooled = g.mean(h, 2)?;
    let pooled = g.reshape(pooled, &[s[1], s[3]])?;
    let (w, b) = (g.param(heads.frame_w)?, g.param(heads.frame_b)?);
    let y = g.matmul(pooled, w)?;
    g.add(y, b)
}

fn question_logits(
    model: &ToyVqaModel,
    heads: &Heads,
    g: &mut Graph<'_>,
    tokens: &[usize],
) -> Result<Var> {
    let q = model.question.forward(g, tokens)?;
    let c = g.shape(q)[0];
    let q = g.reshape(q, &[1, c])?;
    let (w, b) = (g.param(heads.question_w)?, g.param(heads.question_b)?);
    let y = g.matmul(q, w)?;
    let y = g.add(y, b)?;
    g.reshape(y, &[Attribute::ALL.len()])
}

fn frame_targets(s: &ClipSample, t: usize) -> [usize; 2] {
    [
        usize::from(s.event(Attribute::Tool).active[t]),
        usize::from(s.event(Attribute::Illumination).active[t]),
    ]
}

fn sample_loss(
    model: &ToyVqaModel,
    heads: &Heads,
    g: &mut Graph<'_>,
    s: &ClipSample,
    tokens: &[usize],
) -> Result<Var> {
    let logits = frame_logits(model, heads, g, &s.features)?;
    let frames = g.shape(logits)[0];
    let mut terms = Vec::with_capacity(2 * frames + 1);
    for t in 0..frames {
        let row = g.narrow(logits, 0, t, 1)?;
        for (task, target) in frame_targets(s, t).into_iter().enumerate() {
            let part = g.narrow(row, 1, 2 * task, 2)?;
            let part = g.reshape(part, &[2])?;
            let ce = g.cross_entropy(part, target)?;
            terms.push(g.reshape(ce, &[1])?);
        }
    }
    let frame_loss = g.concat(&terms, 0)?;
    let frame_loss = g.mean(frame_loss, 0)?;
    let ql = question_logits(model, heads, g, tokens)?;
    let q_loss = g.cross_entropy(ql, s.attribute.index())?;
    g.add(frame_loss, q_loss)
}

fn evaluate(model: &ToyVqaModel, heads: &Heads, samples: &[&ClipSample]) -> Result<(f64, f64)> {
    let (mut frame_hits, mut frames, mut q_hits) = (0usize, 0usize, 0usize);
    for s in samples {
        let mut g = Graph::with_params(&model.store);
        let logits = frame_logits(model, heads, &mut g, &s.features)?;
        let v = g.value(logits);
        let t = v.shape()[0];
        for f in 0..t {
            let row = &v.data()[f * 4..(f + 1) * 4];
            let [tool, illum] = frame_targets(s, f);
            frame_hits +=
                usize::from(argmax(&row[..2]) == tool) + usize::from(argmax(&row[2..]) == illum);
            frames += 2;
        }
        let ql = question_logits(model, heads, &mut g, &s.question_tokens)?;
        q_hits += usize::from(argmax(g.value(ql).data()) == s.attribute.index());
    }
    Ok((
        frame_hits as f64 / frames.max(1) as f64,
        q_hits as f64 / samples.len().max(1) as f64,
    ))
}

/// Trains the backbone on per-frame tool/illumination classification and
/// on naming the attribute each question asks about, then discards the
/// auxiliary heads and freezes every weight.
pub fn pretrain_backbone(
    model: &mut ToyVqaModel,
    corpus: &Corpus,
    cfg: &PretrainConfig,
    seed: u64,
) -> Result<PretrainReport> {
    if model.head.is_some() {
        return Err(Error::Config(
            "pretraining needs an unwrapped backbone".into(),
        ));
    }
    if !(0.0..1.0).contains(&cfg.unk_rate) {
        return Err(Error::Config(format!(
            "unk_rate must lie in [0, 1), got {}",
            cfg.unk_rate
        )));
    }
    let root = SplitMix64::new(seed);
    let keep = model.store.len();
    let c = model.dims.width;
    let n_attr = Attribute::ALL.len();
    let mut rng = root.substream("pretrain-heads");
    let std = 1.0 / (c as f64).sqrt();
    let heads = Heads {
        frame_w: model.store.add(
            "pretrain.frame.weight",
            Tensor::randn(&[c, 4], std, &mut rng),
            true,
        )?,
        frame_b: model
            .store
            .add("pretrain.frame.bias", Tensor::zeros(&[4]), true)?,
        question_w: model.store.add(
            "pretrain.question.weight",
            Tensor::randn(&[c, n_attr], std, &mut rng),
            true,
        )?,
        question_b: model
            .store
            .add("pretrain.question.bias", Tensor::zeros(&[n_attr]), true)?,
    };
    let train: Vec<&ClipSample> = corpus.split(Split::Train).collect();
    let val: Vec<&ClipSample> = corpus.split(Split::Val).collect();
    if train.is_empty() {
        return Err(Error::Config("pretraining needs training samples".into()));
    }
    let mut opt = Optimizer::new(OptimizerConfig {
        lr: cfg.lr,
        ..OptimizerConfig::default()
    })?;
    let mut shuffle = root.substream("pretrain-shuffle");
    let mut masking = root.substream("pretrain-unk");
    let mut order: Vec<usize> = Vec::new();
    let (mut loss_curve, mut window) = (Vec::new(), 0.0);
    for step in 0..cfg.steps {
        if order.is_empty() {
            order = (0..train.len()).collect();
            shuffle.shuffle(&mut order);
        }
        let s = train[order.pop().expect("refilled above")];
        let tokens: Vec<usize> = s
            .question_tokens
            .iter()
            .map(|&t| {
                if masking.next_f64() < cfg.unk_rate {
                    UNK_ID
                } else {
                    t
                }
            })
            .collect();
        let grads = {
            let mut g = Graph::with_params(&model.store);
            let loss = sample_loss(model, &heads, &mut g, s, &tokens)?;
            let value = g.value(loss).item();
            if !value.is_finite() {
                return Err(Error::Divergence(format!(
                    "pretraining loss {value} at step {step} (sample {}, seed {seed})",
                    s.id
                )));
            }
            window += value;
            g.backward(loss)?
        };
        model.store.accumulate(&grads);
        opt.step(&mut model.store, 1.0);
        if (step + 1) % 100 == 0 || step + 1 == cfg.steps {
            let n = (step % 100) + 1;
            loss_curve.push(window / n as f64);
            window = 0.0;
        }
    }
    let (frame_accuracy, question_accuracy) = evaluate(model, &heads, &val)?;
    model.store.truncate(keep);
    model.freeze();
    Ok(PretrainReport {
        steps: cfg.steps,
        loss_curve,
        frame_accuracy,
        question_accuracy,
        frozen_digest: model.store.frozen_digest(),
    })
}
