use super::config::{AdapterConfig, AdapterKind};
use super::dora::DoraAdapter;
use super::lora::LoraAdapter;
use super::st_adapter::StAdapter;
use super::temporal_dora::TemporalDoraAdapter;
use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::tensor::{Graph, ParamId, ParamStore, Tensor, Var};

/// Base projection `y = x·W0 + b` with `W0: [C_in, C_out]`.
///
/// Trainable only while a backbone is being pretrained; every adapted
/// model keeps it frozen.
#[derive(Clone, Debug)]
pub struct FrozenLinear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub c_in: usize,
    pub c_out: usize,
}

impl FrozenLinear {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        c_in: usize,
        c_out: usize,
        bias: bool,
        rng: &mut SplitMix64,
    ) -> Result<Self> {
        let std = 1.0 / (c_in as f64).sqrt();
        let weight = store.add(
            format!("{name}.weight"),
            Tensor::randn(&[c_in, c_out], std, rng),
            true,
        )?;
        let bias = if bias {
            Some(store.add(format!("{name}.bias"), Tensor::zeros(&[c_out]), true)?)
        } else {
            None
        };
        Ok(Self {
            weight,
            bias,
            c_in,
            c_out,
        })
    }

    pub fn forward(&self, g: &mut Graph<'_>, x: Var) -> Result<Var> {
        let w = g.param(self.weight)?;
        let y = g.matmul(x, w)?;
        self.add_bias(g, y)
    }

    pub(crate) fn add_bias(&self, g: &mut Graph<'_>, y: Var) -> Result<Var> {
        match self.bias {
            Some(b) => {
                let b = g.param(b)?;
                g.add(y, b)
            }
            None => Ok(y),
        }
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        let mut ids = vec![self.weight];
        ids.extend(self.bias);
        ids
    }
}

#[derive(Clone, Debug)]
pub enum Adapter {
    /// LoRA, or LoRA+MHA when it carries a temporal operator.
    Lora(LoraAdapter),
    /// Standard DoRA, or DoRA+MHA when it carries a temporal operator.
    Dora(DoraAdapter),
    TemporalDora(TemporalDoraAdapter),
    StAdapter(StAdapter),
}

impl Adapter {
    pub fn kind(&self) -> AdapterKind {
        match self {
            Adapter::Lora(a) if a.temporal.is_some() => AdapterKind::LoraMha,
            Adapter::Lora(_) => AdapterKind::Lora,
            Adapter::Dora(a) if a.temporal.is_some() => AdapterKind::DoraMha,
            Adapter::Dora(_) => AdapterKind::Dora,
            Adapter::TemporalDora(_) => AdapterKind::TemporalDora,
            Adapter::StAdapter(_) => AdapterKind::StAdapter,
        }
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        match self {
            Adapter::Lora(a) => a.param_ids(),
            Adapter::Dora(a) => a.param_ids(),
            Adapter::TemporalDora(a) => a.param_ids(),
            Adapter::StAdapter(a) => a.param_ids(),
        }
    }
}

/// A frozen projection with at most one trainable adapter attached.
#[derive(Clone, Debug)]
pub struct AdaptedLinear {
    pub name: String,
    pub base: FrozenLinear,
    pub adapter: Option<Adapter>,
}

impl AdaptedLinear {
    pub fn frozen(name: impl Into<String>, base: FrozenLinear) -> Self {
        Self {
            name: name.into(),
            base,
            adapter: None,
        }
    }

    /// Attaches the adapter described by `cfg`, registering its parameters
    /// as `{name}.<param>`. `AdapterKind::None` leaves the layer frozen.
    pub fn attach(
        &mut self,
        store: &mut ParamStore,
        cfg: &AdapterConfig,
        rng: &mut SplitMix64,
    ) -> Result<()> {
        if self.adapter.is_some() {
            return Err(Error::Config(format!(
                "layer `{}` already carries an adapter",
                self.name
            )));
        }
        cfg.validate()?;
        let (c_in, c_out, name) = (self.base.c_in, self.base.c_out, self.name.as_str());
        self.adapter = match cfg.kind {
            AdapterKind::None => None,
            AdapterKind::Lora => Some(Adapter::Lora(LoraAdapter::build(
                store, name, c_in, c_out, cfg, false, rng,
            )?)),
            AdapterKind::LoraMha => Some(Adapter::Lora(LoraAdapter::build(
                store, name, c_in, c_out, cfg, true, rng,
            )?)),
            AdapterKind::Dora => Some(Adapter::Dora(DoraAdapter::build(
                store, name, &self.base, cfg, false, rng,
            )?)),
            AdapterKind::DoraMha => Some(Adapter::Dora(DoraAdapter::build(
                store, name, &self.base, cfg, true, rng,
            )?)),
            AdapterKind::TemporalDora => Some(Adapter::TemporalDora(TemporalDoraAdapter::build(
                store, name, c_in, c_out, cfg, rng,
            )?)),
            AdapterKind::StAdapter => Some(Adapter::StAdapter(StAdapter::build(
                store, name, c_in, c_out, cfg, rng,
            )?)),
        };
        Ok(())
    }

    pub fn kind(&self) -> AdapterKind {
        self.adapter
            .as_ref()
            .map_or(AdapterKind::None, Adapter::kind)
    }

    /// `x: [.., C_in] -> [.., C_out]`. Temporal adapters need `x: [B, T, P, C_in]`.
    pub fn forward(&self, g: &mut Graph<'_>, x: Var) -> Result<Var> {
        let last = g.shape(x).last().copied();
        if last != Some(self.base.c_in) {
            return Err(Error::shape(
                "adapted_linear",
                g.shape(x),
                &[self.base.c_in, self.base.c_out],
            ));
        }
        match &self.adapter {
            None => self.base.forward(g, x),
            Some(Adapter::Dora(d)) => d.forward(g, &self.base, x),
            Some(Adapter::Lora(a)) => {
                let y = self.base.forward(g, x)?;
                let delta = a.residual(g, x)?;
                g.add(y, delta)
            }
            Some(Adapter::TemporalDora(a)) => {
                let y = self.base.forward(g, x)?;
                let delta = a.residual(g, x)?;
                g.add(y, delta)
            }
            Some(Adapter::StAdapter(a)) => {
                let y = self.base.forward(g, x)?;
                let delta = a.residual(g, x)?;
                g.add(y, delta)
            }
        }
    }

    pub fn adapter_param_ids(&self) -> Vec<ParamId> {
        self.adapter
            .as_ref()
            .map_or_else(Vec::new, Adapter::param_ids)
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        let mut ids = self.base.param_ids();
        ids.extend(self.adapter_param_ids());
        ids
    }
}
