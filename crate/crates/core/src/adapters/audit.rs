use serde::{Deserialize, Serialize};

use super::config::{AdapterConfig, AdapterKind, OperatorKind};
use super::linear::AdaptedLinear;
use crate::tensor::{ParamId, ParamStore};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamCount {
    pub trainable: usize,
    pub frozen: usize,
    /// `trainable / (trainable + frozen)`
    pub ratio: f64,
}

impl ParamCount {
    pub fn new(trainable: usize, frozen: usize) -> Self {
        let total = trainable + frozen;
        Self {
            trainable,
            frozen,
            ratio: if total == 0 {
                0.0
            } else {
                trainable as f64 / total as f64
            },
        }
    }

    /// Counts the given tensors by their trainable flags.
    pub fn of_ids(store: &ParamStore, ids: &[ParamId]) -> Self {
        let (t, f) = ids.iter().fold((0, 0), |(t, f), &id| {
            let p = store.get(id);
            if p.trainable {
                (t + p.value.numel(), f)
            } else {
                (t, f + p.value.numel())
            }
        });
        Self::new(t, f)
    }

    pub fn of_store(store: &ParamStore) -> Self {
        let (t, f) = store.count();
        Self::new(t, f)
    }

    pub fn of_layer(store: &ParamStore, layer: &AdaptedLinear) -> Self {
        Self::of_ids(store, &layer.param_ids())
    }
}

/// Closed-form parameter count of a temporal operator of width `r`.
pub fn operator_params(cfg: &AdapterConfig, r: usize) -> usize {
    match cfg.operator {
        OperatorKind::Mha => 4 * r * r + if cfg.pos_embed { cfg.t_max * r } else { 0 },
        OperatorKind::SelfAttention => 3 * r * r,
        OperatorKind::Lstm => 8 * r * r + 4 * r,
        OperatorKind::TemporalConv => cfg.k_t * r,
        OperatorKind::Identity => 0,
    }
}

/// Closed-form trainable count of one adapted `[c_in, c_out]` projection.
pub fn adapter_params(cfg: &AdapterConfig, c_in: usize, c_out: usize) -> usize {
    let r = cfg.rank;
    match cfg.kind {
        AdapterKind::None => 0,
        AdapterKind::Lora => c_in * r + r * c_out,
        AdapterKind::LoraMha => c_in * r + operator_params(cfg, r) + r * c_out,
        AdapterKind::Dora => c_in * r + r * c_out + c_out,
        AdapterKind::DoraMha => c_in * r + operator_params(cfg, r) + r * c_out + c_out,
        AdapterKind::TemporalDora => c_in * r + operator_params(cfg, r) + c_out * r + c_out,
        AdapterKind::StAdapter => {
            let d = cfg.d_st(c_in);
            c_in * d + cfg.k_t * d + d * c_out
        }
    }
}
