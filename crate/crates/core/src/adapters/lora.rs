use super::config::AdapterConfig;
use super::temporal::{from_temporal_sequences, to_temporal_sequences, TemporalOperator};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::tensor::{Graph, ParamId, ParamStore, Tensor, Var};

/// Additive low-rank update `(α/r)·x·A·B`, with `B` zero-initialised.
///
/// With a temporal operator attached (LoRA+MHA) the down-projected features
/// are mixed over frames before `B`.
#[derive(Clone, Debug)]
pub struct LoraAdapter {
    pub a: ParamId,
    pub b: ParamId,
    pub rank: usize,
    pub scaling: f64,
    pub temporal: Option<TemporalOperator>,
}

impl LoraAdapter {
    pub fn build(
        store: &mut ParamStore,
        prefix: &str,
        c_in: usize,
        c_out: usize,
        cfg: &AdapterConfig,
        temporal: bool,
        rng: &mut SplitMix64,
    ) -> Result<Self> {
        let r = cfg.rank;
        let a = store.add(
            format!("{prefix}.lora_a"),
            Tensor::randn(&[c_in, r], 1.0 / (r as f64).sqrt(), rng),
            true,
        )?;
        let b = store.add(format!("{prefix}.lora_b"), Tensor::zeros(&[r, c_out]), true)?;
        let temporal = if temporal {
            Some(TemporalOperator::build(store, prefix, r, cfg, rng)?)
        } else {
            None
        };
        Ok(Self {
            a,
            b,
            rank: r,
            scaling: cfg.scaling(),
            temporal,
        })
    }

    pub fn residual(&self, g: &mut Graph<'_>, x: Var) -> Result<Var> {
        let a = g.param(self.a)?;
        let z = g.matmul(x, a)?;
        let z = match &self.temporal {
            Some(op) => mix_frames(g, op, z)?,
            None => z,
        };
        let b = g.param(self.b)?;
        let delta = g.matmul(z, b)?;
        g.scale(delta, self.scaling)
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        let mut ids = vec![self.a, self.b];
        if let Some(op) = &self.temporal {
            ids.extend(op.param_ids());
        }
        ids
    }
}

/// Runs `op` over the frame axis of `z: [B, T, P, r]`.
pub(crate) fn mix_frames(g: &mut Graph<'_>, op: &TemporalOperator, z: Var) -> Result<Var> {
    let shape = g.shape(z).to_vec();
    if shape.len() != 4 {
        return Err(Error::invalid(
            "temporal adapter",
            format!("needs [B, T, P, C] input, got {shape:?}"),
        ));
    }
    let seq = to_temporal_sequences(g, z)?;
    let mixed = op.apply(g, seq)?;
    from_temporal_sequences(g, mixed, shape[0])
}
