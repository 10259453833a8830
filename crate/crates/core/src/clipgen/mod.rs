//! Deterministic synthetic clip/question/answer corpus.
//!
//! Each clip is `[T, P, D_raw]` with channels
//! `[position, tool, occlusion, illumination, noise...]`. Tool, occlusion
//! and illumination are readable from any single frame; motion direction
//! only from how the position channel changes across frames.

mod corpus;
mod events;
mod pairs;
mod store;
mod templates;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textmetrics::Phrasing;

pub use corpus::{generate_corpus, generate_sample, Corpus};
pub use events::{render_features, sample_events, EventSpec};
pub use pairs::{probe_pairs, reverse_pairs, reverse_sample, ReversePair};
pub use store::{
    corpus_digest, feature_digest, load_corpus, manifest_digest, read_features, save_corpus,
    write_features, Manifest, SampleMeta, FEATURES_FILE, FEATURE_MAGIC, FEATURE_VERSION,
    MANIFEST_FILE,
};
pub use templates::{
    answer_strings, bank, phrasing_of, question_text, template_count, Vocab, IN_TEMPLATE_IDS,
    OUT_OF_TEMPLATE_ID, UNK, UNK_ID,
};

/// Channel layout of a token.
pub const CH_POSITION: usize = 0;
pub const CH_TOOL: usize = 1;
pub const CH_OCCLUSION: usize = 2;
pub const CH_ILLUMINATION: usize = 3;
pub const LATENT_CHANNELS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    Motion,
    Tool,
    Occlusion,
    Illumination,
}

impl Attribute {
    pub const ALL: [Attribute; 4] = [
        Attribute::Motion,
        Attribute::Tool,
        Attribute::Occlusion,
        Attribute::Illumination,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Attribute::Motion => "motion",
            Attribute::Tool => "tool",
            Attribute::Occlusion => "occlusion",
            Attribute::Illumination => "illumination",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn answers(self) -> &'static [Answer] {
        match self {
            Attribute::Motion => &[Answer::Advancing, Answer::Withdrawing, Answer::Stationary],
            Attribute::Tool => &[Answer::ToolVisible, Answer::NoTool],
            Attribute::Occlusion => &[Answer::Occluded, Answer::Clear],
            Attribute::Illumination => &[Answer::NarrowBand, Answer::WhiteLight],
        }
    }
}

/// The closed answer vocabulary. Each answer belongs to one attribute.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Answer {
    Advancing,
    Withdrawing,
    Stationary,
    ToolVisible,
    NoTool,
    Occluded,
    Clear,
    NarrowBand,
    WhiteLight,
}

impl Answer {
    pub const ALL: [Answer; 9] = [
        Answer::Advancing,
        Answer::Withdrawing,
        Answer::Stationary,
        Answer::ToolVisible,
        Answer::NoTool,
        Answer::Occluded,
        Answer::Clear,
        Answer::NarrowBand,
        Answer::WhiteLight,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Answer> {
        Answer::ALL.get(i).copied()
    }

    pub fn text(self) -> &'static str {
        match self {
            Answer::Advancing => "the scope is advancing",
            Answer::Withdrawing => "the scope is withdrawing",
            Answer::Stationary => "the scope is stationary",
            Answer::ToolVisible => "a tool is visible",
            Answer::NoTool => "no tool is present",
            Answer::Occluded => "the view is occluded",
            Answer::Clear => "the view is clear",
            Answer::NarrowBand => "narrow band imaging mode",
            Answer::WhiteLight => "white light mode",
        }
    }

    pub fn attribute(self) -> Attribute {
        match self {
            Answer::Advancing | Answer::Withdrawing | Answer::Stationary => Attribute::Motion,
            Answer::ToolVisible | Answer::NoTool => Attribute::Tool,
            Answer::Occluded | Answer::Clear => Attribute::Occlusion,
            Answer::NarrowBand | Answer::WhiteLight => Attribute::Illumination,
        }
    }

    /// Whether the answer asserts that its event is happening.
    pub fn is_positive(self) -> bool {
        matches!(
            self,
            Answer::Advancing
                | Answer::Withdrawing
                | Answer::ToolVisible
                | Answer::Occluded
                | Answer::NarrowBand
        )
    }

    /// Answers that flip when the clip is played backwards.
    pub fn is_order_dependent(self) -> bool {
        matches!(self, Answer::Advancing | Answer::Withdrawing)
    }

    pub fn reversed(self) -> Answer {
        match self {
            Answer::Advancing => Answer::Withdrawing,
            Answer::Withdrawing => Answer::Advancing,
            other => other,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(Error::Config(format!("unknown split `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub seed: u64,
    pub train: usize,
    pub val: usize,
    /// Clips in the test split; each is emitted once per phrasing.
    pub test_instances: usize,
    pub frames: usize,
    pub patches: usize,
    pub d_raw: usize,
    pub noise_std: f64,
    /// Per-frame position step of a moving scope is drawn from this range.
    pub step_min: f64,
    pub step_max: f64,
    /// Amplitude of the few unsteady frames of a stationary scope.
    pub jitter: f64,
    /// Positive events are active on at least this many frames.
    pub min_active: usize,
    /// Negative events are active on at most this many frames.
    pub max_inactive: usize,
    /// Source video rate and sampling stride, recorded for reference.
    pub fps: u32,
    pub stride: u32,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            seed: 2024,
            train: 4480,
            val: 960,
            test_instances: 480,
            frames: 8,
            patches: 4,
            d_raw: 8,
            noise_std: 0.1,
            step_min: 0.15,
            step_max: 0.35,
            jitter: 0.05,
            min_active: 6,
            max_inactive: 2,
            fps: 30,
            stride: 4,
        }
    }
}

impl CorpusConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.train == 0 || self.val == 0 || self.test_instances == 0 {
            return bad("every split needs at least one sample".into());
        }
        if self.frames < 2 || self.patches == 0 {
            return bad(format!(
                "need frames >= 2 and patches >= 1, got {}x{}",
                self.frames, self.patches
            ));
        }
        if self.d_raw < LATENT_CHANNELS {
            return bad(format!(
                "d_raw must be at least {LATENT_CHANNELS}, got {}",
                self.d_raw
            ));
        }
        if self.min_active > self.frames || self.max_inactive >= self.min_active {
            return bad(format!(
                "need max_inactive < min_active <= frames, got {} / {} / {}",
                self.max_inactive, self.min_active, self.frames
            ));
        }
        if !(self.step_min > 0.0 && self.step_max >= self.step_min)
            || self.noise_std < 0.0
            || self.jitter < 0.0
        {
            return bad("step range, jitter and noise must be non-negative and ordered".into());
        }
        Ok(())
    }

    pub fn feature_len(&self) -> usize {
        self.frames * self.patches * self.d_raw
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClipSample {
    pub id: usize,
    pub split: Split,
    /// Clip index within its split; shared by the two phrasings of a test clip.
    pub instance: usize,
    /// `[T, P, D_raw]`, row-major.
    pub features: Vec<f32>,
    pub events: Vec<EventSpec>,
    pub attribute: Attribute,
    pub answer: Answer,
    pub template_id: usize,
    pub phrasing: Phrasing,
    pub question_text: String,
    pub question_tokens: Vec<usize>,
}

impl ClipSample {
    pub fn answer_text(&self) -> &'static str {
        self.answer.text()
    }

    pub fn event(&self, attribute: Attribute) -> &EventSpec {
        &self.events[attribute.index()]
    }

    /// `(attribute, answer)`: identical for both phrasings of a clip.
    pub fn semantic_id(&self) -> (Attribute, Answer) {
        (self.attribute, self.answer)
    }
}
