use super::config::AdapterConfig;
use super::linear::{AdaptedLinear, FrozenLinear};
use crate::error::Result;
use crate::rng::SplitMix64;
use crate::tensor::{finite_difference_check, GradCheckReport, Graph, ParamStore, Tensor};

/// Shape of a standalone adapted layer and its `[B, T, P, C_in]` input.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LabDims {
    pub c_in: usize,
    pub c_out: usize,
    pub batch: usize,
    pub frames: usize,
    pub patches: usize,
}

impl LabDims {
    pub fn input_shape(&self) -> [usize; 4] {
        [self.batch, self.frames, self.patches, self.c_in]
    }
}

/// One frozen projection with an adapter attached, owning its parameters.
#[derive(Debug)]
pub struct LayerLab {
    pub store: ParamStore,
    pub layer: AdaptedLinear,
    pub dims: LabDims,
}

impl LayerLab {
    /// Random frozen `W0` and bias, then a freshly initialised adapter.
    pub fn new(cfg: &AdapterConfig, dims: LabDims, seed: u64) -> Result<Self> {
        let root = SplitMix64::new(seed);
        let mut store = ParamStore::new();
        let mut rng = root.substream("base");
        let base = FrozenLinear::new(&mut store, "lab", dims.c_in, dims.c_out, true, &mut rng)?;
        if let Some(b) = base.bias {
            *store.value_mut(b) = Tensor::randn(&[dims.c_out], 0.5, &mut rng);
        }
        store.freeze_all();
        let mut layer = AdaptedLinear::frozen("lab", base);
        layer.attach(&mut store, cfg, &mut root.substream("adapter"))?;
        Ok(Self { store, layer, dims })
    }

    /// Overwrites every adapter parameter with `N(0, std²)` draws so that
    /// zero-initialised pieces stop masking the rest of the adapter.
    pub fn randomize_adapter(&mut self, seed: u64, std: f64) {
        let mut rng = SplitMix64::new(seed).substream("randomize");
        for id in self.layer.adapter_param_ids() {
            let shape = self.store.value(id).shape().to_vec();
            *self.store.value_mut(id) = Tensor::randn(&shape, std, &mut rng);
        }
    }

    pub fn input(&self, seed: u64) -> Tensor {
        Tensor::randn(
            &self.dims.input_shape(),
            1.0,
            &mut SplitMix64::new(seed).substream("input"),
        )
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut g = Graph::with_params(&self.store);
        let x = g.constant(x.clone());
        let y = self.layer.forward(&mut g, x)?;
        Ok(g.value(y).clone())
    }

    /// Output of the same layer with the adapter detached.
    pub fn frozen_forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut g = Graph::with_params(&self.store);
        let x = g.constant(x.clone());
        let y = self.layer.base.forward(&mut g, x)?;
        Ok(g.value(y).clone())
    }

    /// Central-difference check of `Σ w ⊙ (h(x) - h₀)` over every adapter
    /// parameter, with `w` a fixed random projection and `h₀` the output at
    /// the starting parameters. Subtracting `h₀` leaves the gradient alone
    /// and keeps the reduction near zero, where its rounding is smallest.
    pub fn gradcheck(&mut self, x: &Tensor, seed: u64, eps: f64) -> Result<GradCheckReport> {
        let d = self.dims;
        let out_shape = [d.batch, d.frames, d.patches, d.c_out];
        let w = Tensor::randn(
            &out_shape,
            1.0,
            &mut SplitMix64::new(seed).substream("projection"),
        );
        let h0 = self.forward(x)?;
        let ids = self.layer.adapter_param_ids();
        let layer = self.layer.clone();
        let x = x.clone();
        finite_difference_check(&mut self.store, &ids, eps, move |g| {
            let xv = g.constant(x.clone());
            let wv = g.constant(w.clone());
            let h0 = g.constant(h0.clone());
            let y = layer.forward(g, xv)?;
            let y = g.sub(y, h0)?;
            let p = g.mul(y, wv)?;
            g.sum_all(p)
        })
    }
}
