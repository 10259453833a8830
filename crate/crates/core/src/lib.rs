//! Temporal low-rank adaptation laboratory.
//!
//! The crate bundles a small reverse-mode tensor engine ([`tensor`]), a zoo of
//! parameter-efficient adapters around frozen projections ([`adapters`]), a
//! frozen toy clip-question-answer network ([`toymodel`]), a deterministic
//! synthetic clip corpus ([`clipgen`]), answer-string metrics
//! ([`textmetrics`]) and the experiment harness behind the `tdora` CLI
//! ([`harness`]).

pub mod adapters;
pub mod clipgen;
pub mod error;
pub mod harness;
pub mod rng;
pub mod tensor;
pub mod textmetrics;
pub mod toymodel;

pub use error::{Error, Result};
