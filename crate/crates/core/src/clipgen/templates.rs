use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{Answer, Attribute};
use crate::textmetrics::{normalize, Phrasing};

/// Templates below this id are used for training and in-template
/// evaluation; the rest are held out.
pub const IN_TEMPLATE_IDS: [usize; 2] = [0, 1];
pub const OUT_OF_TEMPLATE_ID: usize = 2;

/// Question phrasings per attribute, indexed by template id.
const BANK: [(Attribute, [&str; 3]); 4] = [
    (
        Attribute::Motion,
        [
            "is the scope advancing or withdrawing",
            "how is the scope moving",
            "does the scope push in or pull out",
        ],
    ),
    (
        Attribute::Tool,
        [
            "is a tool visible",
            "is there a tool in the frame",
            "can you spot any tool here",
        ],
    ),
    (
        Attribute::Occlusion,
        [
            "is the view occluded",
            "is the view blocked or clear",
            "does something obstruct the view",
        ],
    ),
    (
        Attribute::Illumination,
        [
            "which light mode is used",
            "what light mode is active",
            "under what kind of light was this filmed",
        ],
    ),
];

pub fn question_text(attribute: Attribute, template_id: usize) -> &'static str {
    BANK.iter()
        .find(|(a, _)| *a == attribute)
        .map(|(_, t)| t[template_id])
        .expect("every attribute has a bank entry")
}

pub fn template_count() -> usize {
    BANK[0].1.len()
}

pub fn phrasing_of(template_id: usize) -> Phrasing {
    if IN_TEMPLATE_IDS.contains(&template_id) {
        Phrasing::InTemplate
    } else {
        Phrasing::OutOfTemplate
    }
}

/// All `(attribute, template_id, text)` triples.
pub fn bank() -> impl Iterator<Item = (Attribute, usize, &'static str)> {
    BANK.iter()
        .flat_map(|(a, ts)| ts.iter().enumerate().map(move |(i, t)| (*a, i, *t)))
}

pub const UNK: &str = "<unk>";
pub const UNK_ID: usize = 0;

/// Question vocabulary built from in-template phrasings only. Id 0 is
/// reserved for unknown words.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    words: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn from_words(words: Vec<String>) -> Self {
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        Self { words, index }
    }

    pub fn from_template_bank() -> Self {
        let mut set = BTreeSet::new();
        for (_, id, text) in bank() {
            if phrasing_of(id) == Phrasing::InTemplate {
                set.extend(normalize(text));
            }
        }
        let mut words = vec![UNK.to_string()];
        words.extend(set);
        Self::from_words(words)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn id(&self, word: &str) -> usize {
        self.index.get(word).copied().unwrap_or(0)
    }

    pub fn tokenize(&self, text: &str) -> Vec<usize> {
        normalize(text).iter().map(|w| self.id(w)).collect()
    }

    pub fn detokenize(&self, ids: &[usize]) -> String {
        ids.iter()
            .map(|&i| self.words.get(i).map_or(UNK, String::as_str))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Rebuilds the lookup table after deserialisation.
    pub fn reindexed(self) -> Self {
        Self::from_words(self.words)
    }
}

/// Closed answer set; the classifier's output index is the position here.
pub fn answer_strings() -> Vec<&'static str> {
    Answer::ALL.iter().map(|a| a.text()).collect()
}
