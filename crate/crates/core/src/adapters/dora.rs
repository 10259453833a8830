use super::config::AdapterConfig;
use super::linear::FrozenLinear;
use super::lora::mix_frames;
use super::temporal::TemporalOperator;
use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::tensor::{kernels, Graph, ParamId, ParamStore, Tensor, Var};

/// Columns of the combined weight whose norm falls below this are rejected.
pub const MIN_COLUMN_NORM: f64 = 1e-12;

/// Weight-decomposed low-rank adaptation over the full effective weight.
///
/// `W' = W0 + (α/r)·A·B` is normalised per output column and rescaled by the
/// learnable magnitude `m`, which starts at the column norms of `W0`.
#[derive(Clone, Debug)]
pub struct DoraAdapter {
    pub layer: String,
    pub a: ParamId,
    pub b: ParamId,
    pub magnitude: ParamId,
    pub rank: usize,
    pub scaling: f64,
    /// DoRA+MHA: low-rank features are mixed over frames, while the
    /// column normalisation still covers `W0 + ΔW`.
    pub temporal: Option<TemporalOperator>,
}

impl DoraAdapter {
    pub fn build(
        store: &mut ParamStore,
        prefix: &str,
        base: &FrozenLinear,
        cfg: &AdapterConfig,
        temporal: bool,
        rng: &mut SplitMix64,
    ) -> Result<Self> {
        let r = cfg.rank;
        let (c_in, c_out) = (base.c_in, base.c_out);
        let a = store.add(
            format!("{prefix}.dora_a"),
            Tensor::randn(&[c_in, r], 1.0 / (r as f64).sqrt(), rng),
            true,
        )?;
        let b = store.add(format!("{prefix}.dora_b"), Tensor::zeros(&[r, c_out]), true)?;
        let m = column_norms(store.value(base.weight));
        let magnitude = store.add(
            format!("{prefix}.dora_m"),
            Tensor::new(vec![c_out], m)?,
            true,
        )?;
        let temporal = if temporal {
            Some(TemporalOperator::build(store, prefix, r, cfg, rng)?)
        } else {
            None
        };
        Ok(Self {
            layer: prefix.to_string(),
            a,
            b,
            magnitude,
            rank: r,
            scaling: cfg.scaling(),
            temporal,
        })
    }

    /// `W0 + (α/r)·A·B`, after checking every column is non-degenerate.
    fn combined_weight(&self, g: &mut Graph<'_>, base: &FrozenLinear) -> Result<Var> {
        let w0 = g.param(base.weight)?;
        let (a, b) = (g.param(self.a)?, g.param(self.b)?);
        let ab = g.matmul(a, b)?;
        let delta = g.scale(ab, self.scaling)?;
        let w = g.add(w0, delta)?;
        let norms = column_norms(g.value(w));
        if let Some((j, n)) = norms.iter().enumerate().find(|(_, &n)| n < MIN_COLUMN_NORM) {
            return Err(Error::Numeric(format!(
                "layer `{}` column {j}: combined weight norm {n:e} below {MIN_COLUMN_NORM:e}",
                self.layer
            )));
        }
        Ok(w)
    }

    /// Materialised `W_eff = m ⊙ W' / ‖W'‖_col`.
    pub fn effective_weight(&self, g: &mut Graph<'_>, base: &FrozenLinear) -> Result<Var> {
        let w = self.combined_weight(g, base)?;
        let wt = g.transpose_last(w)?;
        let dir = g.normalize_rows(wt, 0.0)?;
        let dir = g.transpose_last(dir)?;
        let m = g.param(self.magnitude)?;
        g.mul(dir, m)
    }

    pub fn forward(&self, g: &mut Graph<'_>, base: &FrozenLinear, x: Var) -> Result<Var> {
        let y = match &self.temporal {
            None => {
                let w_eff = self.effective_weight(g, base)?;
                g.matmul(x, w_eff)?
            }
            Some(op) => {
                let w = self.combined_weight(g, base)?;
                let wt = g.transpose_last(w)?;
                let inv = g.inv_row_norms(wt)?;
                let m = g.param(self.magnitude)?;
                let col_scale = g.mul(inv, m)?;
                let w0 = g.param(base.weight)?;
                let frozen = g.matmul(x, w0)?;
                let a = g.param(self.a)?;
                let z = g.matmul(x, a)?;
                let z = mix_frames(g, op, z)?;
                let b = g.param(self.b)?;
                let low = g.matmul(z, b)?;
                let low = g.scale(low, self.scaling)?;
                let pre = g.add(frozen, low)?;
                g.mul(pre, col_scale)?
            }
        };
        base.add_bias(g, y)
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        let mut ids = vec![self.a, self.b, self.magnitude];
        if let Some(op) = &self.temporal {
            ids.extend(op.param_ids());
        }
        ids
    }
}

/// Euclidean norm of each column of a `[rows, cols]` matrix.
pub fn column_norms(w: &Tensor) -> Vec<f64> {
    let (rows, cols) = (w.shape()[0], w.shape()[1]);
    (0..cols)
        .map(|j| {
            let col: Vec<f64> = (0..rows).map(|i| w.data()[i * cols + j]).collect();
            kernels::norm(&col)
        })
        .collect()
}
