use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::adapters::{adapter_params, AdapterConfig, AdapterKind, LabDims, LayerLab, ParamCount};
use crate::error::Result;
use crate::toymodel::{ModelDims, ModelPolicy, ToyVqaModel};

/// Layer shape the gradient check runs at.
pub const GRADCHECK_DIMS: LabDims = LabDims {
    c_in: 12,
    c_out: 12,
    batch: 1,
    frames: 4,
    patches: 2,
};
pub const GRADCHECK_RANK: usize = 4;
pub const GRADCHECK_HEADS: usize = 2;
pub const GRADCHECK_EPS: f64 = 1e-5;
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradcheckRow {
    pub variant: String,
    pub seeds: usize,
    pub worst_rel_err: f64,
    pub worst_param: String,
    pub pass: bool,
}

/// Finite-difference check of every adapter variant, each with its
/// parameters randomised so no zero-initialised branch hides the others.
pub fn gradcheck_variants(seeds: &[u64]) -> Result<Vec<GradcheckRow>> {
    let mut rows = Vec::new();
    for cfg in AdapterConfig::variant_grid(GRADCHECK_RANK, GRADCHECK_HEADS, GRADCHECK_DIMS.frames) {
        let (mut worst, mut worst_param) = (0.0f64, String::new());
        for &seed in seeds {
            let mut lab = LayerLab::new(&cfg, GRADCHECK_DIMS, seed)?;
            lab.randomize_adapter(seed + 7, 0.5);
            let x = lab.input(seed + 11);
            let report = lab.gradcheck(&x, seed + 13, GRADCHECK_EPS)?;
            if let Some(p) = report.worst_param() {
                if p.worst_rel_err >= worst {
                    worst = p.worst_rel_err;
                    worst_param = p.name.clone();
                }
            }
        }
        rows.push(GradcheckRow {
            variant: cfg.label(),
            seeds: seeds.len(),
            worst_rel_err: worst,
            worst_param,
            pass: worst < GRADCHECK_TOLERANCE,
        });
    }
    Ok(rows)
}

pub fn gradcheck_table(rows: &[GradcheckRow]) -> String {
    let mut s = format!(
        "{:<28} {:>5} {:>12}  {:<24} status\n",
        "variant", "seeds", "worst_rel", "param"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<28} {:>5} {:>12.3e}  {:<24} {}",
            r.variant,
            r.seeds,
            r.worst_rel_err,
            r.worst_param,
            if r.pass { "pass" } else { "FAIL" }
        );
    }
    s
}

/// Adapter parameter counts on the toy model. The answer head is reported
/// separately and left out of the ratio, so an all-frozen policy has ratio 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub method: String,
    pub adapters: ParamCount,
    pub vision_adapter: usize,
    pub question_adapter: usize,
    /// Closed-form count of the vision adapters.
    pub vision_closed_form: usize,
    pub head: usize,
}

pub fn param_audit(
    dims: &ModelDims,
    question: &AdapterConfig,
    methods: &[AdapterConfig],
) -> Result<Vec<AuditRow>> {
    let mut backbone = ToyVqaModel::backbone(dims, 0)?;
    backbone.freeze();
    let (_, frozen) = backbone.store.count();
    let c = dims.width;
    let mut rows = Vec::new();
    for method in methods {
        let mut m = backbone.clone();
        // `none` audits the fully frozen model, question side included.
        let policy = if method.kind == AdapterKind::None {
            ModelPolicy::frozen()
        } else {
            ModelPolicy {
                vision: method.clone(),
                question: question.clone(),
            }
        };
        m.wrap(&policy, 0)?;
        let count = |layers: Vec<&crate::adapters::AdaptedLinear>| -> usize {
            layers
                .iter()
                .flat_map(|l| l.adapter_param_ids())
                .map(|id| m.store.value(id).numel())
                .sum()
        };
        let vision = count(m.vision_layers().collect());
        let question_n = count(m.question_layers().collect());
        let head = m
            .head_ids()
            .iter()
            .map(|&id| m.store.value(id).numel())
            .sum();
        let vision_closed_form =
            dims.blocks * (adapter_params(method, c, 3 * c) + adapter_params(method, c, c));
        rows.push(AuditRow {
            method: method.label(),
            adapters: ParamCount::new(vision + question_n, frozen),
            vision_adapter: vision,
            question_adapter: question_n,
            vision_closed_form,
            head,
        });
    }
    Ok(rows)
}

pub fn audit_csv(rows: &[AuditRow]) -> String {
    let mut s = String::from(
        "method,trainable,frozen,ratio,vision_adapter,vision_closed_form,question_adapter,head\n",
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{:.6},{},{},{},{}",
            r.method,
            r.adapters.trainable,
            r.adapters.frozen,
            r.adapters.ratio,
            r.vision_adapter,
            r.vision_closed_form,
            r.question_adapter,
            r.head
        );
    }
    s
}
