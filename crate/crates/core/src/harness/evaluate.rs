use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clipgen::{Answer, ClipSample, Corpus, Split};
use crate::error::{Error, Result};
use crate::textmetrics::{
    aggregate, format_predictions, write_report, EvalRecord, MetricReport, Phrasing,
};
use crate::toymodel::ToyVqaModel;

/// Keyword accuracy restricted to questions whose answer depends on frame
/// order, with its binomial chance band.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderAccuracy {
    pub count: usize,
    pub correct: usize,
    pub accuracy: f64,
    /// Two balanced answers that are each other's reversal.
    pub chance: f64,
    /// Binomial standard deviation of the accuracy at chance.
    pub sigma: f64,
}

impl OrderAccuracy {
    pub fn new(count: usize, correct: usize) -> Self {
        let chance = 0.5;
        let n = count.max(1) as f64;
        Self {
            count,
            correct,
            accuracy: correct as f64 / n,
            chance,
            sigma: (chance * (1.0 - chance) / n).sqrt(),
        }
    }

    pub fn within_sigmas_of_chance(&self, k: f64) -> bool {
        (self.accuracy - self.chance).abs() <= k * self.sigma
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub report: MetricReport,
    /// Order-dependent questions per phrasing split.
    pub order_in_template: Option<OrderAccuracy>,
    pub order_out_of_template: Option<OrderAccuracy>,
    #[serde(skip)]
    pub predictions: Vec<EvalRecord>,
}

pub fn check_vocabulary(model: &ToyVqaModel, corpus: &Corpus) -> Result<()> {
    if model.dims.vocab_size != corpus.vocab.len() {
        return Err(Error::Config(format!(
            "model vocabulary has {} entries, corpus vocabulary {}",
            model.dims.vocab_size,
            corpus.vocab.len()
        )));
    }
    Ok(())
}

pub fn record_for(sample: &ClipSample, predicted: Answer) -> EvalRecord {
    EvalRecord {
        prediction: predicted.text().to_string(),
        reference: sample.answer_text().to_string(),
        phrasing: sample.phrasing,
        question_type: sample.attribute.name().to_string(),
    }
}

pub fn predict(model: &ToyVqaModel, sample: &ClipSample) -> Result<Answer> {
    let i = model.predict(&sample.features, &sample.question_tokens)?;
    Answer::from_index(i).ok_or_else(|| Error::Config(format!("model produced answer index {i}")))
}

fn order_accuracy(
    samples: &[&ClipSample],
    predicted: &[Answer],
    phrasing: Phrasing,
) -> Option<OrderAccuracy> {
    let (mut n, mut hits) = (0, 0);
    for (s, p) in samples.iter().zip(predicted) {
        if s.phrasing == phrasing && s.answer.is_order_dependent() {
            n += 1;
            hits += usize::from(*p == s.answer);
        }
    }
    (n > 0).then(|| OrderAccuracy::new(n, hits))
}

/// Predicts every test sample, optionally keeping a single phrasing split,
/// and scores the answer strings.
pub fn evaluate(
    model: &ToyVqaModel,
    corpus: &Corpus,
    filter: Option<Phrasing>,
) -> Result<Evaluation> {
    check_vocabulary(model, corpus)?;
    let samples: Vec<&ClipSample> = corpus
        .split(Split::Test)
        .filter(|s| filter.map_or(true, |f| s.phrasing == f))
        .collect();
    let predicted = samples
        .iter()
        .map(|s| predict(model, s))
        .collect::<Result<Vec<_>>>()?;
    let predictions: Vec<EvalRecord> = samples
        .iter()
        .zip(&predicted)
        .map(|(s, &p)| record_for(s, p))
        .collect();
    Ok(Evaluation {
        report: aggregate(&predictions),
        order_in_template: order_accuracy(&samples, &predicted, Phrasing::InTemplate),
        order_out_of_template: order_accuracy(&samples, &predicted, Phrasing::OutOfTemplate),
        predictions,
    })
}

/// Writes `{stem}.json`, `{stem}.csv` and `{stem}.predictions.tsv`.
pub fn write_evaluation(eval: &Evaluation, dir: &Path, stem: &str) -> Result<()> {
    write_report(&eval.report, dir, stem)?;
    let path = dir.join(format!("{stem}.predictions.tsv"));
    fs::write(&path, format_predictions(&eval.predictions)).map_err(|e| Error::io(&path, e))?;
    let path = dir.join(format!("{stem}.order.json"));
    let order = serde_json::json!({
        "in_template": eval.order_in_template,
        "out_of_template": eval.order_out_of_template,
    });
    fs::write(&path, serde_json::to_string_pretty(&order)?).map_err(|e| Error::io(&path, e))
}
