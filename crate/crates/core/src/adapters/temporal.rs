//! Frame-axis operators that run inside the rank-`r` bottleneck.
//!
//! Every operator maps `[N, T, r] -> [N, T, r]`, where `N` indexes
//! (clip, spatial location) pairs.

use super::config::{AdapterConfig, OperatorKind};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::tensor::{Graph, ParamId, ParamStore, Tensor, Var};

/// `[B, T, P, r] -> [B·P, T, r]`; element `(b, t, p, c)` lands at `(b·P + p, t, c)`.
pub fn to_temporal_sequences(g: &mut Graph<'_>, z: Var) -> Result<Var> {
    let s = g.shape(z).to_vec();
    if s.len() != 4 {
        return Err(Error::invalid(
            "to_temporal_sequences",
            format!("expected [B, T, P, C], got {s:?}"),
        ));
    }
    let (b, t, p, c) = (s[0], s[1], s[2], s[3]);
    let zt = g.transpose(z, &[0, 2, 1, 3])?;
    g.reshape(zt, &[b * p, t, c])
}

/// Inverse of [`to_temporal_sequences`] for `batch` clips.
pub fn from_temporal_sequences(g: &mut Graph<'_>, seq: Var, batch: usize) -> Result<Var> {
    let s = g.shape(seq).to_vec();
    if s.len() != 3 || batch == 0 || s[0] % batch != 0 {
        return Err(Error::invalid(
            "from_temporal_sequences",
            format!("cannot split {s:?} into {batch} clips"),
        ));
    }
    let p = s[0] / batch;
    let z = g.reshape(seq, &[batch, p, s[1], s[2]])?;
    g.transpose(z, &[0, 2, 1, 3])
}

/// Scaled dot-product attention of `q, k, v: [N, L, C]` split into `heads`
/// heads of width `C / heads`. Returns the concatenated head outputs
/// `[N, L, C]` and the attention weights `[N, heads, L, L]`.
pub fn multi_head_attention(
    g: &mut Graph<'_>,
    q: Var,
    k: Var,
    v: Var,
    heads: usize,
) -> Result<(Var, Var)> {
    let s = g.shape(q).to_vec();
    if s.len() != 3 || g.shape(k) != s.as_slice() || g.shape(v) != s.as_slice() {
        return Err(Error::shape("multi_head_attention", &s, g.shape(k)));
    }
    let (n, l, c) = (s[0], s[1], s[2]);
    if heads == 0 || c % heads != 0 {
        return Err(Error::Config(format!(
            "width {c} not divisible by {heads} heads"
        )));
    }
    let dh = c / heads;
    let q4 = g.reshape(q, &[n, l, heads, dh])?;
    let q4 = g.transpose(q4, &[0, 2, 1, 3])?;
    let k4 = g.reshape(k, &[n, l, heads, dh])?;
    let kt = g.transpose(k4, &[0, 2, 3, 1])?;
    let v4 = g.reshape(v, &[n, l, heads, dh])?;
    let v4 = g.transpose(v4, &[0, 2, 1, 3])?;
    let scores = g.bmm(q4, kt)?;
    let scores = g.scale(scores, 1.0 / (dh as f64).sqrt())?;
    let weights = g.softmax(scores, 3)?;
    let ctx = g.bmm(weights, v4)?;
    let ctx = g.transpose(ctx, &[0, 2, 1, 3])?;
    let out = g.reshape(ctx, &[n, l, c])?;
    Ok((out, weights))
}

#[derive(Clone, Debug)]
pub struct MhaOperator {
    pub w_q: ParamId,
    pub w_k: ParamId,
    pub w_v: ParamId,
    pub w_o: ParamId,
    pub heads: usize,
    /// Learnable `[t_max, r]` table added to the sequence before projection.
    pub pos_embed: Option<ParamId>,
    pub t_max: usize,
}

#[derive(Clone, Debug)]
pub struct SelfAttentionOperator {
    pub w_q: ParamId,
    pub w_k: ParamId,
    pub w_v: ParamId,
}

/// Unidirectional LSTM emitting the hidden state at every step.
/// Gate layout along the `4r` axis: input, forget, cell, output.
#[derive(Clone, Debug)]
pub struct LstmOperator {
    pub w_x: ParamId,
    pub w_h: ParamId,
    pub bias: ParamId,
    pub width: usize,
}

#[derive(Clone, Debug)]
pub struct TemporalConvOperator {
    /// Depthwise kernel `[k_t, r]`.
    pub kernel: ParamId,
}

#[derive(Clone, Debug)]
pub enum TemporalOperator {
    Mha(MhaOperator),
    SelfAttention(SelfAttentionOperator),
    Lstm(LstmOperator),
    TemporalConv(TemporalConvOperator),
    Identity,
}

fn square(
    store: &mut ParamStore,
    name: String,
    width: usize,
    rng: &mut SplitMix64,
) -> Result<ParamId> {
    let std = 1.0 / (width as f64).sqrt();
    store.add(name, Tensor::randn(&[width, width], std, rng), true)
}

impl TemporalOperator {
    /// Registers a fresh trainable operator of the configured kind.
    pub fn build(
        store: &mut ParamStore,
        prefix: &str,
        width: usize,
        cfg: &AdapterConfig,
        rng: &mut SplitMix64,
    ) -> Result<Self> {
        Ok(match cfg.operator {
            OperatorKind::Identity => TemporalOperator::Identity,
            OperatorKind::Mha => {
                if cfg.heads == 0 || width % cfg.heads != 0 {
                    return Err(Error::Config(format!(
                        "MHA needs width divisible by heads (width {width}, heads {})",
                        cfg.heads
                    )));
                }
                let w_q = square(store, format!("{prefix}.mha.w_q"), width, rng)?;
                let w_k = square(store, format!("{prefix}.mha.w_k"), width, rng)?;
                let w_v = square(store, format!("{prefix}.mha.w_v"), width, rng)?;
                let w_o = square(store, format!("{prefix}.mha.w_o"), width, rng)?;
                let pos_embed = if cfg.pos_embed {
                    Some(store.add(
                        format!("{prefix}.mha.pos_embed"),
                        Tensor::zeros(&[cfg.t_max, width]),
                        true,
                    )?)
                } else {
                    None
                };
                TemporalOperator::Mha(MhaOperator {
                    w_q,
                    w_k,
                    w_v,
                    w_o,
                    heads: cfg.heads,
                    pos_embed,
                    t_max: cfg.t_max,
                })
            }
            OperatorKind::SelfAttention => TemporalOperator::SelfAttention(SelfAttentionOperator {
                w_q: square(store, format!("{prefix}.sa.w_q"), width, rng)?,
                w_k: square(store, format!("{prefix}.sa.w_k"), width, rng)?,
                w_v: square(store, format!("{prefix}.sa.w_v"), width, rng)?,
            }),
            OperatorKind::Lstm => {
                let std = 1.0 / (width as f64).sqrt();
                let w_x = store.add(
                    format!("{prefix}.lstm.w_x"),
                    Tensor::randn(&[width, 4 * width], std, rng),
                    true,
                )?;
                let w_h = store.add(
                    format!("{prefix}.lstm.w_h"),
                    Tensor::randn(&[width, 4 * width], std, rng),
                    true,
                )?;
                // forget-gate bias starts at 1
                let bias =
                    Tensor::from_fn(&[4 * width], |i| if i / width == 1 { 1.0 } else { 0.0 });
                let bias = store.add(format!("{prefix}.lstm.bias"), bias, true)?;
                TemporalOperator::Lstm(LstmOperator {
                    w_x,
                    w_h,
                    bias,
                    width,
                })
            }
            OperatorKind::TemporalConv => {
                if cfg.k_t % 2 == 0 {
                    return Err(Error::Config(format!("k_t must be odd, got {}", cfg.k_t)));
                }
                let std = 1.0 / (cfg.k_t as f64).sqrt();
                let kernel = store.add(
                    format!("{prefix}.conv.kernel"),
                    Tensor::randn(&[cfg.k_t, width], std, rng),
                    true,
                )?;
                TemporalOperator::TemporalConv(TemporalConvOperator { kernel })
            }
        })
    }

    pub fn kind(&self) -> OperatorKind {
        match self {
            TemporalOperator::Mha(_) => OperatorKind::Mha,
            TemporalOperator::SelfAttention(_) => OperatorKind::SelfAttention,
            TemporalOperator::Lstm(_) => OperatorKind::Lstm,
            TemporalOperator::TemporalConv(_) => OperatorKind::TemporalConv,
            TemporalOperator::Identity => OperatorKind::Identity,
        }
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        match self {
            TemporalOperator::Mha(m) => {
                let mut ids = vec![m.w_q, m.w_k, m.w_v, m.w_o];
                ids.extend(m.pos_embed);
                ids
            }
            TemporalOperator::SelfAttention(s) => vec![s.w_q, s.w_k, s.w_v],
            TemporalOperator::Lstm(l) => vec![l.w_x, l.w_h, l.bias],
            TemporalOperator::TemporalConv(c) => vec![c.kernel],
            TemporalOperator::Identity => Vec::new(),
        }
    }

    /// Applies the operator to `seq: [N, T, r]`.
    pub fn apply(&self, g: &mut Graph<'_>, seq: Var) -> Result<Var> {
        Ok(self.apply_with_attention(g, seq)?.0)
    }

    /// Like [`Self::apply`], also returning attention weights
    /// `[N, heads, T, T]` for the attention operators.
    pub fn apply_with_attention(&self, g: &mut Graph<'_>, seq: Var) -> Result<(Var, Option<Var>)> {
        let s = g.shape(seq).to_vec();
        if s.len() != 3 {
            return Err(Error::invalid(
                "temporal_apply",
                format!("expected [N, T, r], got {s:?}"),
            ));
        }
        let t = s[1];
        match self {
            TemporalOperator::Identity => Ok((seq, None)),
            TemporalOperator::Mha(m) => {
                let mut z = seq;
                if let Some(pe) = m.pos_embed {
                    if t > m.t_max {
                        return Err(Error::Config(format!(
                            "clip length {t} exceeds positional table of {} frames",
                            m.t_max
                        )));
                    }
                    let pe = g.param(pe)?;
                    let pe = g.narrow(pe, 0, 0, t)?;
                    z = g.add(z, pe)?;
                }
                let (wq, wk, wv, wo) = (
                    g.param(m.w_q)?,
                    g.param(m.w_k)?,
                    g.param(m.w_v)?,
                    g.param(m.w_o)?,
                );
                let q = g.matmul(z, wq)?;
                let k = g.matmul(z, wk)?;
                let v = g.matmul(z, wv)?;
                let (ctx, w) = multi_head_attention(g, q, k, v, m.heads)?;
                Ok((g.matmul(ctx, wo)?, Some(w)))
            }
            TemporalOperator::SelfAttention(a) => {
                let (wq, wk, wv) = (g.param(a.w_q)?, g.param(a.w_k)?, g.param(a.w_v)?);
                let q = g.matmul(seq, wq)?;
                let k = g.matmul(seq, wk)?;
                let v = g.matmul(seq, wv)?;
                let (out, w) = multi_head_attention(g, q, k, v, 1)?;
                Ok((out, Some(w)))
            }
            TemporalOperator::Lstm(l) => Ok((lstm(g, l, seq)?, None)),
            TemporalOperator::TemporalConv(c) => {
                let k = g.param(c.kernel)?;
                Ok((g.depthwise_conv_t(seq, k)?, None))
            }
        }
    }
}

fn lstm(g: &mut Graph<'_>, l: &LstmOperator, seq: Var) -> Result<Var> {
    let s = g.shape(seq).to_vec();
    let (n, t, r) = (s[0], s[1], s[2]);
    if r != l.width {
        return Err(Error::shape("lstm", &s, &[l.width]));
    }
    let (w_x, w_h, bias) = (g.param(l.w_x)?, g.param(l.w_h)?, g.param(l.bias)?);
    // input contributions for all steps at once: [N, T, 4r]
    let xg = g.matmul(seq, w_x)?;
    let xg = g.add(xg, bias)?;
    let mut h: Option<Var> = None;
    let mut c: Option<Var> = None;
    let mut outputs = Vec::with_capacity(t);
    for step in 0..t {
        let xs = g.narrow(xg, 1, step, 1)?;
        let mut gates = g.reshape(xs, &[n, 4 * r])?;
        if let Some(hp) = h {
            let hg = g.matmul(hp, w_h)?;
            gates = g.add(gates, hg)?;
        }
        let i = g.narrow(gates, 1, 0, r)?;
        let i = g.sigmoid(i)?;
        let f = g.narrow(gates, 1, r, r)?;
        let f = g.sigmoid(f)?;
        let cand = g.narrow(gates, 1, 2 * r, r)?;
        let cand = g.tanh(cand)?;
        let o = g.narrow(gates, 1, 3 * r, r)?;
        let o = g.sigmoid(o)?;
        let ic = g.mul(i, cand)?;
        let c_new = match c {
            Some(cp) => {
                let fc = g.mul(f, cp)?;
                g.add(fc, ic)?
            }
            None => ic,
        };
        let tc = g.tanh(c_new)?;
        let h_new = g.mul(o, tc)?;
        outputs.push(g.reshape(h_new, &[n, 1, r])?);
        h = Some(h_new);
        c = Some(c_new);
    }
    g.concat(&outputs, 1)
}
