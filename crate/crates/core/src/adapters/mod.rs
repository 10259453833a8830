//! Parameter-efficient adapters around frozen projections.
//!
//! [`AdaptedLinear`] pairs a [`FrozenLinear`] base with one of the adapters
//! below. Every adapter starts as an exact no-op: LoRA and ST-Adapter
//! zero their up-projections, DoRA starts its magnitude at the base column
//! norms, and the temporal DoRA adapter starts its magnitude at zero.

mod audit;
mod config;
mod dora;
mod lab;
mod linear;
mod lora;
mod st_adapter;
pub mod temporal;
mod temporal_dora;

pub use audit::{adapter_params, operator_params, ParamCount};
pub use config::{AdapterConfig, AdapterKind, OperatorKind};
pub use dora::{column_norms, DoraAdapter, MIN_COLUMN_NORM};
pub use lab::{LabDims, LayerLab};
pub use linear::{AdaptedLinear, Adapter, FrozenLinear};
pub use lora::LoraAdapter;
pub use st_adapter::StAdapter;
pub use temporal::{
    from_temporal_sequences, multi_head_attention, to_temporal_sequences, TemporalOperator,
};
pub use temporal_dora::{tdora_down, tdora_up_weight, TemporalDoraAdapter};
