use super::corpus::Corpus;
use super::events::{render_features, sample_events};
use super::templates::{question_text, Vocab, IN_TEMPLATE_IDS};
use super::{phrasing_of, Answer, ClipSample, CorpusConfig, Split};
use crate::rng::{derive_seed, SplitMix64};

#[derive(Clone, Debug, PartialEq)]
pub struct ReversePair {
    pub original: ClipSample,
    pub reversed: ClipSample,
}

/// The same clip played backwards, with the answer re-derived from the
/// reversed events.
pub fn reverse_sample(sample: &ClipSample) -> ClipSample {
    let frames = sample.events[0].active.len();
    let per_frame = sample.features.len() / frames;
    let features = sample
        .features
        .chunks(per_frame)
        .rev()
        .flatten()
        .copied()
        .collect();
    let events: Vec<_> = sample.events.iter().map(|e| e.reversed()).collect();
    ClipSample {
        features,
        answer: events[sample.attribute.index()].value,
        events,
        ..sample.clone()
    }
}

/// Every sample whose answer flips under frame reversal, paired with its
/// reversal.
pub fn reverse_pairs(corpus: &Corpus) -> Vec<ReversePair> {
    corpus
        .samples
        .iter()
        .filter(|s| s.answer.is_order_dependent())
        .map(|s| ReversePair {
            original: s.clone(),
            reversed: reverse_sample(s),
        })
        .collect()
}

/// `n` fresh in-template motion clips, alternating advancing and
/// withdrawing, each paired with its reversal. Independent of any corpus
/// drawn with a different `seed`.
pub fn probe_pairs(cfg: &CorpusConfig, seed: u64, n: usize) -> Vec<ReversePair> {
    let vocab = Vocab::from_template_bank();
    (0..n)
        .map(|i| {
            let rng = SplitMix64::new(derive_seed(seed, "probe", i as u64));
            let answer = if i % 2 == 0 {
                Answer::Advancing
            } else {
                Answer::Withdrawing
            };
            let events = sample_events(cfg, Some(answer), &mut rng.substream("events"));
            let features = render_features(cfg, &events, &mut rng.substream("noise"));
            let template_id =
                IN_TEMPLATE_IDS[rng.substream("template").below(IN_TEMPLATE_IDS.len())];
            let question = question_text(answer.attribute(), template_id);
            let original = ClipSample {
                id: i,
                split: Split::Test,
                instance: i,
                features,
                events,
                attribute: answer.attribute(),
                answer,
                template_id,
                phrasing: phrasing_of(template_id),
                question_text: question.to_string(),
                question_tokens: vocab.tokenize(question),
            };
            let reversed = reverse_sample(&original);
            ReversePair { original, reversed }
        })
        .collect()
}
