//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Each export takes plain numbers or strings and returns a JSON string,
//! so the page needs no generated TypeScript types.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use tdora::adapters::{
    adapter_params, to_temporal_sequences, Adapter, AdapterConfig, AdapterKind, LabDims, LayerLab,
    OperatorKind,
};
use tdora::clipgen::{probe_pairs, CorpusConfig};
use tdora::tensor::{Graph, Tensor};
use tdora::textmetrics::score_pair;

#[derive(Debug, Serialize)]
pub struct AttentionView {
    pub frames: usize,
    pub heads: usize,
    pub answer: String,
    /// `[heads][T][T]`, averaged over patches.
    pub weights: Vec<Vec<Vec<f64>>>,
    /// Per-frame position channel of the clip as fed in.
    pub position: Vec<f64>,
    /// `max |f(reverse(x)) - reverse(f(x))|` for each adapter.
    pub lora_reversal_gap: f64,
    pub tdora_reversal_gap: f64,
}

fn clip_tensor(features: &[f32], frames: usize, patches: usize, d: usize) -> Tensor {
    Tensor::new(
        vec![1, frames, patches, d],
        features.iter().map(|&v| f64::from(v)).collect(),
    )
    .expect("clip matches its config")
}

fn reverse_frames(x: &Tensor) -> Tensor {
    let s = x.shape().to_vec();
    let inner = s[2] * s[3];
    Tensor::from_fn(&s, |i| {
        let (t, j) = (i / inner, i % inner);
        x.data()[(s[1] - 1 - t) * inner + j]
    })
}

fn reversal_gap(lab: &LayerLab, x: &Tensor) -> Result<f64, String> {
    let y = lab.forward(x).map_err(|e| e.to_string())?;
    let y_rev = lab.forward(&reverse_frames(x)).map_err(|e| e.to_string())?;
    Ok(y_rev.max_abs_diff(&reverse_frames(&y)))
}

/// Attention of a randomly initialised TemporalDoRA bottleneck over the
/// frames of one synthetic motion clip.
pub fn attention_view(
    seed: u64,
    heads: usize,
    pos_embed: bool,
    reverse: bool,
) -> Result<AttentionView, String> {
    let corpus = CorpusConfig::default();
    let pair = probe_pairs(&corpus, seed, 1).remove(0);
    let clip = if reverse {
        pair.reversed
    } else {
        pair.original
    };
    let (t, p, d) = (corpus.frames, corpus.patches, corpus.d_raw);
    let dims = LabDims {
        c_in: d,
        c_out: d,
        batch: 1,
        frames: t,
        patches: p,
    };
    let cfg = AdapterConfig {
        rank: 8,
        heads,
        pos_embed,
        ..AdapterConfig::default()
    };
    cfg.validate().map_err(|e| e.to_string())?;
    let mut lab = LayerLab::new(&cfg, dims, seed).map_err(|e| e.to_string())?;
    lab.randomize_adapter(seed, 0.5);
    let x = clip_tensor(&clip.features, t, p, d);

    let Some(Adapter::TemporalDora(adapter)) = &lab.layer.adapter else {
        return Err("expected a TemporalDoRA adapter".into());
    };
    let weights = {
        let mut g = Graph::with_params(&lab.store);
        let xv = g.constant(x.clone());
        let z = adapter.down(&mut g, xv).map_err(|e| e.to_string())?;
        let seq = to_temporal_sequences(&mut g, z).map_err(|e| e.to_string())?;
        let (_, attn) = adapter
            .operator
            .apply_with_attention(&mut g, seq)
            .map_err(|e| e.to_string())?;
        let attn = attn.ok_or("operator has no attention weights")?;
        let w = g.value(attn);
        let mut out = vec![vec![vec![0.0; t]; t]; heads];
        for n in 0..p {
            for (h, head) in out.iter_mut().enumerate() {
                for (i, row) in head.iter_mut().enumerate() {
                    for (j, cell) in row.iter_mut().enumerate() {
                        *cell += w.data()[((n * heads + h) * t + i) * t + j] / p as f64;
                    }
                }
            }
        }
        out
    };

    let lora_cfg = AdapterConfig {
        kind: AdapterKind::Lora,
        ..cfg.clone()
    };
    let mut lora = LayerLab::new(&lora_cfg, dims, seed).map_err(|e| e.to_string())?;
    lora.randomize_adapter(seed, 0.5);
    Ok(AttentionView {
        frames: t,
        heads,
        answer: clip.answer.text().to_string(),
        weights,
        position: (0..t)
            .map(|f| f64::from(clip.features[f * p * d]))
            .collect(),
        lora_reversal_gap: reversal_gap(&lora, &x)?,
        tdora_reversal_gap: reversal_gap(&lab, &x)?,
    })
}

#[derive(Debug, Serialize)]
pub struct AuditLine {
    pub method: String,
    /// Adapter parameters on the fused `[C, 3C]` projection.
    pub qkv: usize,
    /// Adapter parameters on the `[C, C]` output projection.
    pub out: usize,
    pub per_block: usize,
    /// Frozen parameters of both projections in one block.
    pub frozen_per_block: usize,
    pub ratio: f64,
}

/// Closed-form adapter sizes for one attention block of width `width`.
pub fn audit_lines(width: usize, rank: usize, heads: usize) -> Result<Vec<AuditLine>, String> {
    let frozen = width * 3 * width + 3 * width + width * width + width;
    let mut out = Vec::new();
    for kind in [
        AdapterKind::Lora,
        AdapterKind::Dora,
        AdapterKind::StAdapter,
        AdapterKind::TemporalDora,
        AdapterKind::LoraMha,
        AdapterKind::DoraMha,
    ] {
        let cfg = AdapterConfig {
            kind,
            rank,
            heads,
            operator: OperatorKind::Mha,
            ..AdapterConfig::default()
        };
        cfg.validate().map_err(|e| e.to_string())?;
        let qkv = adapter_params(&cfg, width, 3 * width);
        let o = adapter_params(&cfg, width, width);
        out.push(AuditLine {
            method: kind.name().to_string(),
            qkv,
            out: o,
            per_block: qkv + o,
            frozen_per_block: frozen,
            ratio: (qkv + o) as f64 / (qkv + o + frozen) as f64,
        });
    }
    Ok(out)
}

fn to_json<T: Serialize>(value: Result<T, String>) -> Result<String, JsError> {
    let v = value.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn attention_map(
    seed: u32,
    heads: u32,
    pos_embed: bool,
    reverse: bool,
) -> Result<String, JsError> {
    to_json(attention_view(
        u64::from(seed),
        heads as usize,
        pos_embed,
        reverse,
    ))
}

#[wasm_bindgen]
pub fn param_audit(width: u32, rank: u32, heads: u32) -> Result<String, JsError> {
    to_json(audit_lines(width as usize, rank as usize, heads as usize))
}

#[wasm_bindgen]
pub fn text_metrics(prediction: &str, reference: &str) -> Result<String, JsError> {
    to_json(Ok(score_pair(prediction, reference)))
}
