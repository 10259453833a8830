use super::events::{render_features, sample_events, EventSpec};
use super::templates::{question_text, Vocab, IN_TEMPLATE_IDS, OUT_OF_TEMPLATE_ID};
use super::{phrasing_of, Answer, Attribute, ClipSample, CorpusConfig, Split};
use crate::error::Result;
use crate::rng::{derive_seed, SplitMix64};

#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub config: CorpusConfig,
    pub vocab: Vocab,
    pub samples: Vec<ClipSample>,
}

impl Corpus {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &ClipSample> {
        self.samples.iter().filter(move |s| s.split == split)
    }

    pub fn count(&self, split: Split) -> usize {
        self.split(split).count()
    }
}

/// Answer for clip `instance` of a split: attributes cycle, and values
/// cycle within each attribute.
fn scheduled_answer(instance: usize) -> Answer {
    let attr = Attribute::ALL[instance % Attribute::ALL.len()];
    let values = attr.answers();
    values[(instance / Attribute::ALL.len()) % values.len()]
}

/// Latent events and features of one clip, seeded only by
/// `(corpus seed, split, instance)` so clips can be produced in any order.
pub fn generate_sample(
    cfg: &CorpusConfig,
    split: Split,
    instance: usize,
) -> (Vec<EventSpec>, Vec<f32>, usize) {
    let rng = SplitMix64::new(derive_seed(cfg.seed, split.name(), instance as u64));
    let events = sample_events(
        cfg,
        Some(scheduled_answer(instance)),
        &mut rng.substream("events"),
    );
    let features = render_features(cfg, &events, &mut rng.substream("noise"));
    let template = IN_TEMPLATE_IDS[rng.substream("template").below(IN_TEMPLATE_IDS.len())];
    (events, features, template)
}

pub(crate) fn make_sample(
    vocab: &Vocab,
    id: usize,
    split: Split,
    instance: usize,
    events: Vec<EventSpec>,
    features: Vec<f32>,
    template_id: usize,
) -> ClipSample {
    let answer = scheduled_answer(instance);
    let attribute = answer.attribute();
    let question = question_text(attribute, template_id);
    ClipSample {
        id,
        split,
        instance,
        features,
        events,
        attribute,
        answer,
        template_id,
        phrasing: phrasing_of(template_id),
        question_text: question.to_string(),
        question_tokens: vocab.tokenize(question),
    }
}

pub fn generate_corpus(cfg: &CorpusConfig) -> Result<Corpus> {
    cfg.validate()?;
    let vocab = Vocab::from_template_bank();
    let mut samples = Vec::with_capacity(cfg.train + cfg.val + 2 * cfg.test_instances);
    for (split, n) in [
        (Split::Train, cfg.train),
        (Split::Val, cfg.val),
        (Split::Test, cfg.test_instances),
    ] {
        for instance in 0..n {
            let (events, features, template) = generate_sample(cfg, split, instance);
            if split == Split::Test {
                let id = samples.len();
                samples.push(make_sample(
                    &vocab,
                    id,
                    split,
                    instance,
                    events.clone(),
                    features.clone(),
                    template,
                ));
                let id = samples.len();
                samples.push(make_sample(
                    &vocab,
                    id,
                    split,
                    instance,
                    events,
                    features,
                    OUT_OF_TEMPLATE_ID,
                ));
            } else {
                let id = samples.len();
                samples.push(make_sample(
                    &vocab, id, split, instance, events, features, template,
                ));
            }
        }
    }
    Ok(Corpus {
        config: cfg.clone(),
        vocab,
        samples,
    })
}
