use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::scores::{bleu4_counts, keyword_accuracy, meteor_lite, rouge_l, BleuCounts};
use super::{normalize, EvalRecord, Phrasing, STOPWORDS_VERSION};

pub const METEOR_VARIANT: &str = "meteor-lite (exact match, no stemming or synonyms)";
const BLEU_VARIANT: &str = "corpus BLEU-4 over pooled n-gram counts";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub count: usize,
    pub degenerate: usize,
    pub bleu4: f64,
    pub rouge_l: f64,
    pub meteor: f64,
    pub acc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricGap {
    pub bleu4: f64,
    pub rouge_l: f64,
    pub meteor: f64,
    pub acc: f64,
}

/// Metrics per phrasing split. A split without records is `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub in_template: Option<SplitMetrics>,
    pub out_of_template: Option<SplitMetrics>,
    pub overall: Option<SplitMetrics>,
    /// In-template minus out-of-template, when both splits are present.
    pub gap: Option<MetricGap>,
    pub by_question_type: BTreeMap<String, SplitMetrics>,
    pub bleu_variant: String,
    pub meteor_variant: String,
    pub stopwords_version: String,
}

impl MetricReport {
    pub fn split(&self, phrasing: Phrasing) -> Option<&SplitMetrics> {
        match phrasing {
            Phrasing::InTemplate => self.in_template.as_ref(),
            Phrasing::OutOfTemplate => self.out_of_template.as_ref(),
        }
    }
}

fn summarize<'a>(records: impl Iterator<Item = &'a EvalRecord>) -> Option<SplitMetrics> {
    let mut counts = BleuCounts::default();
    let (mut n, mut degenerate) = (0usize, 0usize);
    let (mut rl, mut met, mut acc) = (0.0, 0.0, 0.0);
    for rec in records {
        let (p, r) = (normalize(&rec.prediction), normalize(&rec.reference));
        n += 1;
        if p.is_empty() || r.is_empty() {
            degenerate += 1;
        }
        counts.add(&bleu4_counts(&p, &r));
        rl += rouge_l(&p, &r);
        met += meteor_lite(&p, &r);
        acc += keyword_accuracy(&p, &r);
    }
    (n > 0).then(|| SplitMetrics {
        count: n,
        degenerate,
        bleu4: counts.score(),
        rouge_l: rl / n as f64,
        meteor: met / n as f64,
        acc: acc / n as f64,
    })
}

pub fn aggregate(records: &[EvalRecord]) -> MetricReport {
    let in_template = summarize(
        records
            .iter()
            .filter(|r| r.phrasing == Phrasing::InTemplate),
    );
    let out_of_template = summarize(
        records
            .iter()
            .filter(|r| r.phrasing == Phrasing::OutOfTemplate),
    );
    let gap = match (&in_template, &out_of_template) {
        (Some(a), Some(b)) => Some(MetricGap {
            bleu4: a.bleu4 - b.bleu4,
            rouge_l: a.rouge_l - b.rouge_l,
            meteor: a.meteor - b.meteor,
            acc: a.acc - b.acc,
        }),
        _ => None,
    };
    let mut types: Vec<&str> = records.iter().map(|r| r.question_type.as_str()).collect();
    types.sort_unstable();
    types.dedup();
    let by_question_type = types
        .into_iter()
        .filter_map(|t| {
            summarize(records.iter().filter(|r| r.question_type == t)).map(|m| (t.to_string(), m))
        })
        .collect();
    MetricReport {
        in_template,
        out_of_template,
        overall: summarize(records.iter()),
        gap,
        by_question_type,
        bleu_variant: BLEU_VARIANT.into(),
        meteor_variant: METEOR_VARIANT.into(),
        stopwords_version: STOPWORDS_VERSION.into(),
    }
}
