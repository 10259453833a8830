use super::config::AdapterConfig;
use super::lora::mix_frames;
use super::temporal::TemporalOperator;
use crate::error::Result;
use crate::rng::SplitMix64;
use crate::tensor::{Graph, ParamId, ParamStore, Tensor, Var};

/// Temporal low-rank residual with a decomposed up-projection.
///
/// ```text
/// h(X) = X·W0 + (α/r) · op(X·W_down) · W_up
/// W_up = (diag(m) · V̂)ᵀ,   V̂(i,:) = V(i,:) / (‖V(i,:)‖₂ + ε)
/// ```
///
/// Only the low-rank branch is decomposed; `W0` keeps its pretrained
/// direction. `m` starts at zero, so the residual starts at exactly zero.
#[derive(Clone, Debug)]
pub struct TemporalDoraAdapter {
    /// `[C_in, r]`
    pub w_down: ParamId,
    pub operator: TemporalOperator,
    /// Direction `[C_out, r]`.
    pub direction: ParamId,
    /// Magnitude `[C_out]`.
    pub magnitude: ParamId,
    pub rank: usize,
    pub scaling: f64,
    pub epsilon: f64,
}

impl TemporalDoraAdapter {
    pub fn build(
        store: &mut ParamStore,
        prefix: &str,
        c_in: usize,
        c_out: usize,
        cfg: &AdapterConfig,
        rng: &mut SplitMix64,
    ) -> Result<Self> {
        let r = cfg.rank;
        let std = 1.0 / (r as f64).sqrt();
        let w_down = store.add(
            format!("{prefix}.tdora_down"),
            Tensor::randn(&[c_in, r], std, rng),
            true,
        )?;
        let operator = TemporalOperator::build(store, prefix, r, cfg, rng)?;
        let direction = store.add(
            format!("{prefix}.tdora_v"),
            Tensor::randn(&[c_out, r], std, rng),
            true,
        )?;
        let magnitude = store.add(format!("{prefix}.tdora_m"), Tensor::zeros(&[c_out]), true)?;
        Ok(Self {
            w_down,
            operator,
            direction,
            magnitude,
            rank: r,
            scaling: cfg.scaling(),
            epsilon: cfg.epsilon,
        })
    }

    pub fn down(&self, g: &mut Graph<'_>, x: Var) -> Result<Var> {
        tdora_down(g, x, self.w_down)
    }

    pub fn up_weight(&self, g: &mut Graph<'_>) -> Result<Var> {
        tdora_up_weight(g, self.direction, self.magnitude, self.epsilon)
    }

    /// `(α/r) · op(X·W_down) · W_up` for `x: [B, T, P, C_in]`.
    pub fn residual(&self, g: &mut Graph<'_>, x: Var) -> Result<Var> {
        let z = self.down(g, x)?;
        let mixed = mix_frames(g, &self.operator, z)?;
        let w_up = self.up_weight(g)?;
        let delta = g.matmul(mixed, w_up)?;
        g.scale(delta, self.scaling)
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        let mut ids = vec![self.w_down];
        ids.extend(self.operator.param_ids());
        ids.extend([self.direction, self.magnitude]);
        ids
    }
}

/// `Z = X·W_down`, no bias.
pub fn tdora_down(g: &mut Graph<'_>, x: Var, w_down: ParamId) -> Result<Var> {
    let w = g.param(w_down)?;
    g.matmul(x, w)
}

/// Row-normalises `V: [C_out, r]`, scales row `i` by `m[i]` and transposes,
/// giving `W_up: [r, C_out]`.
pub fn tdora_up_weight(
    g: &mut Graph<'_>,
    direction: ParamId,
    magnitude: ParamId,
    epsilon: f64,
) -> Result<Var> {
    let v = g.param(direction)?;
    let v_hat = g.normalize_rows(v, epsilon)?;
    let v_hat_t = g.transpose_last(v_hat)?;
    let m = g.param(magnitude)?;
    g.mul(v_hat_t, m)
}
