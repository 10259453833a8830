use crate::adapters::{multi_head_attention, AdaptedLinear, AdapterConfig, FrozenLinear};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::tensor::{Graph, ParamId, ParamStore, Tensor, Var};

pub const LN_EPS: f64 = 1e-5;

/// Two-layer GELU MLP.
#[derive(Clone, Debug)]
pub struct Mlp {
    pub fc1: FrozenLinear,
    pub fc2: FrozenLinear,
}

impl Mlp {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        c: usize,
        hidden: usize,
        rng: &mut SplitMix64,
    ) -> Result<Self> {
        Ok(Self {
            fc1: FrozenLinear::new(store, &format!("{name}.fc1"), c, hidden, true, rng)?,
            fc2: FrozenLinear::new(store, &format!("{name}.fc2"), hidden, c, true, rng)?,
        })
    }

    pub fn forward(&self, g: &mut Graph<'_>, x: Var) -> Result<Var> {
        let h = self.fc1.forward(g, x)?;
        let h = g.gelu(h)?;
        self.fc2.forward(g, h)
    }
}

/// Pre-norm block attending over the patches of each frame separately.
#[derive(Clone, Debug)]
pub struct VisionBlock {
    /// Fused `[C, 3C]` query/key/value projection.
    pub qkv: AdaptedLinear,
    pub out: AdaptedLinear,
    pub mlp: Mlp,
    pub heads: usize,
    pub width: usize,
}

impl VisionBlock {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        c: usize,
        hidden: usize,
        heads: usize,
        rng: &mut SplitMix64,
    ) -> Result<Self> {
        let qkv = FrozenLinear::new(store, &format!("{name}.attn.qkv"), c, 3 * c, true, rng)?;
        let out = FrozenLinear::new(store, &format!("{name}.attn.out"), c, c, true, rng)?;
        Ok(Self {
            qkv: AdaptedLinear::frozen(format!("{name}.attn.qkv"), qkv),
            out: AdaptedLinear::frozen(format!("{name}.attn.out"), out),
            mlp: Mlp::new(store, &format!("{name}.mlp"), c, hidden, rng)?,
            heads,
            width: c,
        })
    }

    pub fn attach(
        &mut self,
        store: &mut ParamStore,
        cfg: &AdapterConfig,
        rng: &mut SplitMix64,
    ) -> Result<()> {
        self.qkv.attach(store, cfg, rng)?;
        self.out.attach(store, cfg, rng)
    }

    /// `x: [B, T, P, C] -> [B, T, P, C]`.
    pub fn forward(&self, g: &mut Graph<'_>, x: Var) -> Result<Var> {
        let s = g.shape(x).to_vec();
        let (b, t, p, c) = (s[0], s[1], s[2], s[3]);
        let h = g.layer_norm(x, LN_EPS)?;
        let qkv = self.qkv.forward(g, h)?;
        let mut parts = [qkv; 3];
        for (i, part) in parts.iter_mut().enumerate() {
            let slice = g.narrow(qkv, 3, i * c, c)?;
            *part = g.reshape(slice, &[b * t, p, c])?;
        }
        let (ctx, _) = multi_head_attention(g, parts[0], parts[1], parts[2], self.heads)?;
        let ctx = g.reshape(ctx, &[b, t, p, c])?;
        let o = self.out.forward(g, ctx)?;
        let x = g.add(x, o)?;
        let h = g.layer_norm(x, LN_EPS)?;
        let m = self.mlp.forward(g, h)?;
        g.add(x, m)
    }
}

/// Token embedding, one self-attention block, mean pooling.
#[derive(Clone, Debug)]
pub struct QuestionEncoder {
    pub embed: ParamId,
    pub vocab_size: usize,
    pub q: AdaptedLinear,
    pub k: AdaptedLinear,
    pub v: AdaptedLinear,
    pub o: AdaptedLinear,
    pub mlp: Mlp,
    pub heads: usize,
}

impl QuestionEncoder {
    pub fn new(
        store: &mut ParamStore,
        vocab_size: usize,
        c: usize,
        hidden: usize,
        heads: usize,
        rng: &mut SplitMix64,
    ) -> Result<Self> {
        let embed = store.add(
            "question.embed",
            Tensor::randn(&[vocab_size, c], 1.0, rng),
            true,
        )?;
        let mut proj = |n: &str| -> Result<AdaptedLinear> {
            let name = format!("question.attn.{n}");
            Ok(AdaptedLinear::frozen(
                name.clone(),
                FrozenLinear::new(store, &name, c, c, true, rng)?,
            ))
        };
        let (q, k, v, o) = (proj("q")?, proj("k")?, proj("v")?, proj("o")?);
        Ok(Self {
            embed,
            vocab_size,
            q,
            k,
            v,
            o,
            mlp: Mlp::new(store, "question.mlp", c, hidden, rng)?,
            heads,
        })
    }

    pub fn projections_mut(&mut self) -> [&mut AdaptedLinear; 4] {
        [&mut self.q, &mut self.k, &mut self.v, &mut self.o]
    }

    pub fn projections(&self) -> [&AdaptedLinear; 4] {
        [&self.q, &self.k, &self.v, &self.o]
    }

    /// Token ids -> pooled `[C]` encoding.
    pub fn forward(&self, g: &mut Graph<'_>, tokens: &[usize]) -> Result<Var> {
        if tokens.is_empty() {
            return Err(Error::invalid("question_encoder", "empty question"));
        }
        let table = g.param(self.embed)?;
        let e = g.gather_rows(table, tokens)?;
        let (l, c) = (tokens.len(), g.shape(e)[1]);
        let h = g.layer_norm(e, LN_EPS)?;
        let q = self.q.forward(g, h)?;
        let k = self.k.forward(g, h)?;
        let v = self.v.forward(g, h)?;
        let q = g.reshape(q, &[1, l, c])?;
        let k = g.reshape(k, &[1, l, c])?;
        let v = g.reshape(v, &[1, l, c])?;
        let (ctx, _) = multi_head_attention(g, q, k, v, self.heads)?;
        let ctx = g.reshape(ctx, &[l, c])?;
        let o = self.o.forward(g, ctx)?;
        let e = g.add(e, o)?;
        let h = g.layer_norm(e, LN_EPS)?;
        let m = self.mlp.forward(g, h)?;
        let e = g.add(e, m)?;
        g.mean(e, 0)
    }
}
