use super::config::AdapterConfig;
use super::temporal::{from_temporal_sequences, to_temporal_sequences};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::tensor::{Graph, ParamId, ParamStore, Tensor, Var};

/// Bottleneck adapter with a depthwise temporal convolution:
/// `gelu(conv_t(X·W_down))·W_up`, `W_up` zero-initialised.
#[derive(Clone, Debug)]
pub struct StAdapter {
    pub w_down: ParamId,
    /// `[k_t, d_st]`
    pub kernel: ParamId,
    pub w_up: ParamId,
    pub width: usize,
}

impl StAdapter {
    pub fn build(
        store: &mut ParamStore,
        prefix: &str,
        c_in: usize,
        c_out: usize,
        cfg: &AdapterConfig,
        rng: &mut SplitMix64,
    ) -> Result<Self> {
        let d = cfg.d_st(c_in);
        if cfg.k_t % 2 == 0 {
            return Err(Error::Config(format!("k_t must be odd, got {}", cfg.k_t)));
        }
        let w_down = store.add(
            format!("{prefix}.st_down"),
            Tensor::randn(&[c_in, d], 1.0 / (c_in as f64).sqrt(), rng),
            true,
        )?;
        let kernel = store.add(
            format!("{prefix}.st_kernel"),
            Tensor::randn(&[cfg.k_t, d], 1.0 / (cfg.k_t as f64).sqrt(), rng),
            true,
        )?;
        let w_up = store.add(format!("{prefix}.st_up"), Tensor::zeros(&[d, c_out]), true)?;
        Ok(Self {
            w_down,
            kernel,
            w_up,
            width: d,
        })
    }

    pub fn residual(&self, g: &mut Graph<'_>, x: Var) -> Result<Var> {
        let shape = g.shape(x).to_vec();
        if shape.len() != 4 {
            return Err(Error::invalid(
                "st_adapter",
                format!("needs [B, T, P, C] input, got {shape:?}"),
            ));
        }
        let w_down = g.param(self.w_down)?;
        let z = g.matmul(x, w_down)?;
        let seq = to_temporal_sequences(g, z)?;
        let k = g.param(self.kernel)?;
        let conv = g.depthwise_conv_t(seq, k)?;
        let act = g.gelu(conv)?;
        let act = from_temporal_sequences(g, act, shape[0])?;
        let w_up = g.param(self.w_up)?;
        g.matmul(act, w_up)
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        vec![self.w_down, self.kernel, self.w_up]
    }
}
