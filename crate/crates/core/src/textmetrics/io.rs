use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{EvalRecord, MetricReport, SplitMetrics};
use crate::error::{Error, Result};

/// Parses `prediction \t reference \t phrasing \t question_type` lines.
/// Blank lines are skipped.
pub fn parse_predictions(text: &str) -> Result<Vec<EvalRecord>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::Format(format!(
                "predictions line {}: expected 4 tab-separated fields, found {}",
                lineno + 1,
                fields.len()
            )));
        }
        let phrasing = fields[2]
            .parse()
            .map_err(|e| Error::Format(format!("predictions line {}: {e}", lineno + 1)))?;
        out.push(EvalRecord {
            prediction: fields[0].to_string(),
            reference: fields[1].to_string(),
            phrasing,
            question_type: fields[3].to_string(),
        });
    }
    Ok(out)
}

pub fn read_predictions(path: &Path) -> Result<Vec<EvalRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_predictions(&text)
}

pub fn format_predictions(records: &[EvalRecord]) -> String {
    let mut s = String::new();
    for r in records {
        let clean = |x: &str| x.replace(['\t', '\n', '\r'], " ");
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}",
            clean(&r.prediction),
            clean(&r.reference),
            r.phrasing.name(),
            clean(&r.question_type)
        );
    }
    s
}

fn csv_row(s: &mut String, split: &str, m: &SplitMetrics) {
    let _ = writeln!(
        s,
        "{split},{},{},{:.6},{:.6},{:.6},{:.6}",
        m.count, m.degenerate, m.bleu4, m.rouge_l, m.meteor, m.acc
    );
}

pub fn report_csv(report: &MetricReport) -> String {
    let mut s = String::from("split,count,degenerate,bleu4,rouge_l,meteor_lite,acc\n");
    for (name, m) in [
        ("in_template", &report.in_template),
        ("out_of_template", &report.out_of_template),
        ("overall", &report.overall),
    ] {
        if let Some(m) = m {
            csv_row(&mut s, name, m);
        }
    }
    if let Some(g) = &report.gap {
        let _ = writeln!(
            s,
            "gap,,,{:.6},{:.6},{:.6},{:.6}",
            g.bleu4, g.rouge_l, g.meteor, g.acc
        );
    }
    s
}

/// Writes `{stem}.json` and `{stem}.csv` into `dir`.
pub fn write_report(report: &MetricReport, dir: &Path, stem: &str) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json = dir.join(format!("{stem}.json"));
    fs::write(&json, serde_json::to_string_pretty(report)?).map_err(|e| Error::io(&json, e))?;
    let csv = dir.join(format!("{stem}.csv"));
    fs::write(&csv, report_csv(report)).map_err(|e| Error::io(&csv, e))?;
    Ok(())
}
