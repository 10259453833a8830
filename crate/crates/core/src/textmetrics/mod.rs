//! Answer-quality metrics over prediction/reference string pairs.
//!
//! All four metrics share [`normalize`]: lowercase, every non-alphanumeric
//! character becomes a separator, whitespace splits tokens.

mod aggregate;
mod io;
mod scores;

use std::collections::HashSet;
use std::sync::OnceLock;

pub use aggregate::{aggregate, MetricReport, SplitMetrics, METEOR_VARIANT};
pub use io::{format_predictions, parse_predictions, read_predictions, report_csv, write_report};
pub use scores::{
    bleu4, bleu4_counts, keyword_accuracy, meteor_lite, rouge_l, BleuCounts, BLEU_SMOOTHING,
};

use serde::{Deserialize, Serialize};

/// Stopword list removed from references before keyword matching.
pub const STOPWORDS_FILE: &str = include_str!("../../data/stopwords-v1.txt");
pub const STOPWORDS_VERSION: &str = "v1";

pub fn normalize(text: &str) -> Vec<String> {
    let cleaned: String = text
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect::<String>()
        .to_lowercase();
    cleaned.split_whitespace().map(str::to_owned).collect()
}

pub fn stopwords() -> &'static HashSet<String> {
    static WORDS: OnceLock<HashSet<String>> = OnceLock::new();
    WORDS.get_or_init(|| {
        STOPWORDS_FILE
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_owned)
            .collect()
    })
}

/// Reference tokens that are not stopwords.
pub fn keywords(reference: &[String]) -> HashSet<String> {
    let stop = stopwords();
    reference
        .iter()
        .filter(|t| !stop.contains(*t))
        .cloned()
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phrasing {
    InTemplate,
    OutOfTemplate,
}

impl Phrasing {
    pub fn name(self) -> &'static str {
        match self {
            Phrasing::InTemplate => "in_template",
            Phrasing::OutOfTemplate => "out_of_template",
        }
    }
}

impl std::str::FromStr for Phrasing {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "in_template" | "in" => Ok(Phrasing::InTemplate),
            "out_of_template" | "out" => Ok(Phrasing::OutOfTemplate),
            _ => Err(crate::Error::Format(format!("unknown phrasing `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub prediction: String,
    pub reference: String,
    pub phrasing: Phrasing,
    pub question_type: String,
}

impl EvalRecord {
    /// Empty prediction or reference after normalisation.
    pub fn is_degenerate(&self) -> bool {
        normalize(&self.prediction).is_empty() || normalize(&self.reference).is_empty()
    }
}

/// Per-pair scores.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairScores {
    pub bleu4: f64,
    pub rouge_l: f64,
    pub meteor: f64,
    pub acc: f64,
}

pub fn score_pair(prediction: &str, reference: &str) -> PairScores {
    let (p, r) = (normalize(prediction), normalize(reference));
    PairScores {
        bleu4: bleu4(&p, &r),
        rouge_l: rouge_l(&p, &r),
        meteor: meteor_lite(&p, &r),
        acc: keyword_accuracy(&p, &r),
    }
}

#[cfg(test)]
mod tests;
