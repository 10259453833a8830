//! Small frozen clip-question-answer network used to compare adapters.
//!
//! The vision stack only mixes information across patches of the same
//! frame, and clip features are mean-pooled over frames before the head.
//! A temporal adapter is therefore the only way frame order can reach
//! the answer.

mod blocks;
mod pretrain;

use serde::{Deserialize, Serialize};

pub use blocks::{Mlp, QuestionEncoder, VisionBlock, LN_EPS};
pub use pretrain::{pretrain_backbone, PretrainConfig, PretrainReport};

use crate::adapters::{AdaptedLinear, AdapterConfig, AdapterKind, FrozenLinear};
use crate::clipgen::{Answer, Vocab};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::tensor::{Graph, ParamId, ParamStore, Tensor, Var};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelDims {
    pub width: usize,
    pub patches: usize,
    /// Longest clip the model accepts.
    pub frames: usize,
    pub d_raw: usize,
    pub blocks: usize,
    pub heads: usize,
    pub mlp_hidden: usize,
    pub vocab_size: usize,
    pub answers: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        Self {
            width: 32,
            patches: 4,
            frames: 8,
            d_raw: 8,
            blocks: 2,
            heads: 4,
            mlp_hidden: 64,
            vocab_size: Vocab::from_template_bank().len(),
            answers: Answer::ALL.len(),
        }
    }
}

/// Which adapter goes on the vision projections and which on the
/// question-encoder projections.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelPolicy {
    pub vision: AdapterConfig,
    pub question: AdapterConfig,
}

impl Default for ModelPolicy {
    fn default() -> Self {
        Self {
            vision: AdapterConfig::default(),
            question: AdapterConfig::of_kind(AdapterKind::Dora),
        }
    }
}

impl ModelPolicy {
    pub fn frozen() -> Self {
        Self {
            vision: AdapterConfig::of_kind(AdapterKind::None),
            question: AdapterConfig::of_kind(AdapterKind::None),
        }
    }

    pub fn with_vision(vision: AdapterConfig) -> Self {
        Self {
            vision,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct ToyVqaModel {
    pub dims: ModelDims,
    pub store: ParamStore,
    pub patch_embed: FrozenLinear,
    pub blocks: Vec<VisionBlock>,
    pub question: QuestionEncoder,
    /// Present once the model has been wrapped.
    pub head: Option<FrozenLinear>,
    pub policy: Option<ModelPolicy>,
}

impl ToyVqaModel {
    /// Randomly initialised backbone with every weight trainable, ready for
    /// pretraining.
    pub fn backbone(dims: &ModelDims, seed: u64) -> Result<Self> {
        let mut store = ParamStore::new();
        let mut rng = SplitMix64::new(seed).substream("backbone");
        let c = dims.width;
        let patch_embed =
            FrozenLinear::new(&mut store, "patch_embed", dims.d_raw, c, true, &mut rng)?;
        let blocks = (0..dims.blocks)
            .map(|i| {
                VisionBlock::new(
                    &mut store,
                    &format!("vision.{i}"),
                    c,
                    dims.mlp_hidden,
                    dims.heads,
                    &mut rng,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let question = QuestionEncoder::new(
            &mut store,
            dims.vocab_size,
            c,
            dims.mlp_hidden,
            dims.heads,
            &mut rng,
        )?;
        Ok(Self {
            dims: dims.clone(),
            store,
            patch_embed,
            blocks,
            question,
            head: None,
            policy: None,
        })
    }

    pub fn freeze(&mut self) {
        self.store.freeze_all();
    }

    pub fn vision_layers(&self) -> impl Iterator<Item = &AdaptedLinear> {
        self.blocks.iter().flat_map(|b| [&b.qkv, &b.out])
    }

    pub fn question_layers(&self) -> impl Iterator<Item = &AdaptedLinear> {
        self.question.projections().into_iter()
    }

    /// Attaches adapters per `policy` and a fresh trainable head. The
    /// backbone must already be frozen.
    pub fn wrap(&mut self, policy: &ModelPolicy, seed: u64) -> Result<()> {
        if self.head.is_some() {
            return Err(Error::Config("model is already wrapped".into()));
        }
        if self.store.count().0 != 0 {
            return Err(Error::Config(
                "backbone must be frozen before wrapping".into(),
            ));
        }
        policy.vision.validate()?;
        policy.question.validate()?;
        if policy.question.kind.is_temporal() {
            return Err(Error::Config(format!(
                "question encoder adapters must be per-token, got `{}`",
                policy.question.kind.name()
            )));
        }
        let root = SplitMix64::new(seed);
        for block in &mut self.blocks {
            for layer in [&mut block.qkv, &mut block.out] {
                let mut rng = root.substream(&format!("adapter:{}", layer.name));
                layer.attach(&mut self.store, &policy.vision, &mut rng)?;
            }
        }
        for layer in self.question.projections_mut() {
            let mut rng = root.substream(&format!("adapter:{}", layer.name));
            layer.attach(&mut self.store, &policy.question, &mut rng)?;
        }
        let mut rng = root.substream("head");
        let head = FrozenLinear::new(
            &mut self.store,
            "head",
            2 * self.dims.width,
            self.dims.answers,
            true,
            &mut rng,
        )?;
        self.head = Some(head);
        self.policy = Some(policy.clone());
        Ok(())
    }

    pub fn head_ids(&self) -> Vec<ParamId> {
        self.head
            .as_ref()
            .map_or_else(Vec::new, FrozenLinear::param_ids)
    }

    /// Adapter parameters of every wrapped layer.
    pub fn adapter_ids(&self) -> Vec<ParamId> {
        self.vision_layers()
            .chain(self.question_layers())
            .flat_map(AdaptedLinear::adapter_param_ids)
            .collect()
    }

    pub fn frames_of(&self, clip: &[f32]) -> Result<usize> {
        let per_frame = self.dims.patches * self.dims.d_raw;
        if clip.is_empty() || clip.len() % per_frame != 0 {
            return Err(Error::invalid(
                "toy_model",
                format!(
                    "clip of {} values is not a whole number of [{}, {}] frames",
                    clip.len(),
                    self.dims.patches,
                    self.dims.d_raw
                ),
            ));
        }
        let t = clip.len() / per_frame;
        if t > self.dims.frames {
            return Err(Error::Config(format!(
                "clip has {t} frames, model accepts at most {}",
                self.dims.frames
            )));
        }
        Ok(t)
    }

    /// Clip `[T, P, D_raw]` -> vision tokens `[1, T, P, C]`.
    pub fn vision_tokens(&self, g: &mut Graph<'_>, clip: &[f32]) -> Result<Var> {
        let t = self.frames_of(clip)?;
        let x = Tensor::new(
            vec![1, t, self.dims.patches, self.dims.d_raw],
            clip.iter().map(|&v| f64::from(v)).collect(),
        )?;
        let x = g.constant(x);
        let mut h = self.patch_embed.forward(g, x)?;
        for block in &self.blocks {
            h = block.forward(g, h)?;
        }
        Ok(h)
    }

    /// Logits over the answer vocabulary, `[answers]`.
    pub fn forward(&self, g: &mut Graph<'_>, clip: &[f32], tokens: &[usize]) -> Result<Var> {
        let head = self
            .head
            .as_ref()
            .ok_or_else(|| Error::Config("model has no answer head; wrap it first".into()))?;
        let c = self.dims.width;
        let h = self.vision_tokens(g, clip)?;
        let n = g.value(h).numel() / c;
        let flat = g.reshape(h, &[n, c])?;
        let vision = g.mean(flat, 0)?;
        let question = self.question.forward(g, tokens)?;
        let joint = g.concat(&[vision, question], 0)?;
        let joint = g.reshape(joint, &[1, 2 * c])?;
        let logits = head.forward(g, joint)?;
        g.reshape(logits, &[self.dims.answers])
    }

    pub fn loss(
        &self,
        g: &mut Graph<'_>,
        clip: &[f32],
        tokens: &[usize],
        target: usize,
    ) -> Result<Var> {
        let logits = self.forward(g, clip, tokens)?;
        g.cross_entropy(logits, target)
    }

    pub fn logits(&self, clip: &[f32], tokens: &[usize]) -> Result<Vec<f64>> {
        let mut g = Graph::with_params(&self.store);
        let l = self.forward(&mut g, clip, tokens)?;
        Ok(g.value(l).data().to_vec())
    }

    /// Index of the largest logit; ties go to the lower index.
    pub fn predict(&self, clip: &[f32], tokens: &[usize]) -> Result<usize> {
        Ok(argmax(&self.logits(clip, tokens)?))
    }
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests;
