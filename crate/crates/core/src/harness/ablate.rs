use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::run::{train_run, RunReport};
use crate::adapters::{AdapterConfig, AdapterKind, OperatorKind};
use crate::clipgen::Corpus;
use crate::error::{Error, Result};
use crate::textmetrics::SplitMetrics;
use crate::toymodel::ToyVqaModel;

/// The temporal DoRA adapter under each operator in `ops`.
pub fn operator_variants(base: &AdapterConfig, ops: &[OperatorKind]) -> Vec<AdapterConfig> {
    ops.iter()
        .map(|&operator| AdapterConfig {
            kind: AdapterKind::TemporalDora,
            operator,
            ..base.clone()
        })
        .collect()
}

/// One config per adapter kind in `kinds`, sharing the other settings.
pub fn method_variants(base: &AdapterConfig, kinds: &[AdapterKind]) -> Vec<AdapterConfig> {
    kinds
        .iter()
        .map(|&kind| AdapterConfig {
            kind,
            operator: OperatorKind::Mha,
            ..base.clone()
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: String,
    pub trainable: usize,
    pub best_val_loss: Option<f64>,
    pub in_template: Option<SplitMetrics>,
    pub out_of_template: Option<SplitMetrics>,
    /// `None` when the run finished.
    pub failure: Option<String>,
}

impl AblationRow {
    fn of_report(variant: String, r: &RunReport) -> Self {
        Self {
            variant,
            trainable: r.param_count.trainable,
            best_val_loss: Some(r.best_val_loss),
            in_template: r.evaluation.report.in_template.clone(),
            out_of_template: r.evaluation.report.out_of_template.clone(),
            failure: None,
        }
    }
}

fn run_dir_name(label: &str) -> String {
    label.replace(['/', '+'], "_")
}

/// Trains every variant from the same backbone, seed and schedule. A
/// failing variant gets a row with its error and the sweep moves on.
pub fn ablate(
    cfg: &ExperimentConfig,
    corpus: &Corpus,
    backbone: &ToyVqaModel,
    variants: &[AdapterConfig],
) -> Result<Vec<AblationRow>> {
    if variants.is_empty() {
        return Err(Error::Config("ablation needs at least one variant".into()));
    }
    let sweep = cfg
        .paths
        .run
        .clone()
        .unwrap_or_else(|| PathBuf::from("ablate"));
    let mut rows = Vec::new();
    for v in variants {
        let label = v.label();
        let mut run = cfg.clone();
        run.policy.vision = v.clone();
        run.paths.run = Some(sweep.join(run_dir_name(&label)));
        let row = run
            .validate()
            .and_then(|()| train_run(&run, corpus, backbone))
            .map(|(_, report)| AblationRow::of_report(label.clone(), &report))
            .unwrap_or_else(|e| AblationRow {
                variant: label.clone(),
                trainable: 0,
                best_val_loss: None,
                in_template: None,
                out_of_template: None,
                failure: Some(e.to_string()),
            });
        rows.push(row);
    }
    Ok(rows)
}

fn metric_cells(s: &mut String, m: Option<&SplitMetrics>) {
    match m {
        Some(m) => {
            let _ = write!(
                s,
                ",{:.6},{:.6},{:.6},{:.6}",
                m.bleu4, m.rouge_l, m.meteor, m.acc
            );
        }
        None => s.push_str(",,,,"),
    }
}

/// In-template then out-of-template B4/RL/MET/Acc per variant.
pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut s = String::from(
        "variant,in_bleu4,in_rouge_l,in_meteor,in_acc,out_bleu4,out_rouge_l,out_meteor,out_acc,trainable,best_val_loss,status\n",
    );
    for r in rows {
        s.push_str(&r.variant);
        metric_cells(&mut s, r.in_template.as_ref());
        metric_cells(&mut s, r.out_of_template.as_ref());
        let loss = r
            .best_val_loss
            .map_or_else(String::new, |v| format!("{v:.8}"));
        let status = r.failure.as_deref().map_or_else(
            || "ok".to_string(),
            |e| format!("failed: {}", e.replace(',', ";")),
        );
        let _ = writeln!(s, ",{},{loss},{status}", r.trainable);
    }
    s
}

/// Every `run.json` directly below `root` or one directory deeper, sorted
/// by path.
pub fn collect_runs(root: &Path) -> Result<Vec<(PathBuf, RunReport)>> {
    let mut found = Vec::new();
    let mut dirs = vec![(root.to_path_buf(), 0)];
    while let Some((dir, depth)) = dirs.pop() {
        let entries = fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))?;
        for entry in entries {
            let path = entry.map_err(|e| Error::io(&dir, e))?.path();
            if path.is_dir() && depth < 2 {
                dirs.push((path, depth + 1));
            } else if path.file_name().is_some_and(|n| n == "run.json") {
                let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                found.push((path, serde_json::from_str(&text)?));
            }
        }
    }
    found.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(found)
}

/// One line per run: adapter, best epoch and loss, both splits' metrics,
/// order-dependent accuracy.
pub fn summary_csv(runs: &[(PathBuf, RunReport)]) -> String {
    let mut s = String::from(
        "run,adapter,best_epoch,best_val_loss,in_bleu4,in_rouge_l,in_meteor,in_acc,out_bleu4,out_rouge_l,out_meteor,out_acc,order_in_acc,order_out_acc,trainable\n",
    );
    for (path, r) in runs {
        let name = path
            .parent()
            .map_or_else(String::new, |p| p.display().to_string());
        let _ = write!(
            s,
            "{name},{},{},{:.8}",
            r.adapter, r.best_epoch, r.best_val_loss
        );
        metric_cells(&mut s, r.evaluation.report.in_template.as_ref());
        metric_cells(&mut s, r.evaluation.report.out_of_template.as_ref());
        let acc = |o: &Option<super::evaluate::OrderAccuracy>| {
            o.as_ref()
                .map_or_else(String::new, |o| format!("{:.6}", o.accuracy))
        };
        let _ = writeln!(
            s,
            ",{},{},{}",
            acc(&r.evaluation.order_in_template),
            acc(&r.evaluation.order_out_of_template),
            r.param_count.trainable
        );
    }
    s
}
