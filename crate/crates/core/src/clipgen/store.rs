use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::corpus::Corpus;
use super::events::EventSpec;
use super::templates::{answer_strings, Vocab};
use super::{Answer, Attribute, ClipSample, CorpusConfig, Split};
use crate::error::{Error, Result};
use crate::textmetrics::Phrasing;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const FEATURES_FILE: &str = "features.bin";
pub const FEATURE_MAGIC: [u8; 4] = *b"TDCL";
pub const FEATURE_VERSION: u32 = 1;
const DTYPE_F32: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 8 + 4 + 3 * 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub id: usize,
    pub split: Split,
    pub instance: usize,
    pub attribute: Attribute,
    pub answer: Answer,
    pub answer_text: String,
    pub template_id: usize,
    pub phrasing: Phrasing,
    pub question: String,
    pub question_tokens: Vec<usize>,
    pub events: Vec<EventSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub config: CorpusConfig,
    pub counts: SplitCounts,
    pub answers: Vec<String>,
    pub vocabulary: Vocab,
    pub feature_file: String,
    pub feature_sha256: String,
    pub samples: Vec<SampleMeta>,
}

/// Serialises features as the flat binary layout described in `docs/FORMATS.md`.
pub fn write_features(corpus: &Corpus) -> Vec<u8> {
    let cfg = &corpus.config;
    let mut out = Vec::with_capacity(HEADER_LEN + corpus.samples.len() * cfg.feature_len() * 4);
    out.extend_from_slice(&FEATURE_MAGIC);
    out.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    out.extend_from_slice(&DTYPE_F32.to_le_bytes());
    out.extend_from_slice(&(corpus.samples.len() as u64).to_le_bytes());
    out.extend_from_slice(&3u32.to_le_bytes());
    for d in [cfg.frames, cfg.patches, cfg.d_raw] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for s in &corpus.samples {
        for v in &s.features {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().expect("4 bytes"))
}

/// Parses a feature file into `(shape, per-sample features)`.
pub fn read_features(bytes: &[u8]) -> Result<([usize; 3], Vec<Vec<f32>>)> {
    let bad = |m: &str| Error::Format(format!("feature file: {m}"));
    if bytes.len() < HEADER_LEN {
        return Err(bad("truncated header"));
    }
    if bytes[..4] != FEATURE_MAGIC {
        return Err(bad("bad magic"));
    }
    let version = u32_at(bytes, 4);
    if version != FEATURE_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    if u32_at(bytes, 8) != DTYPE_F32 {
        return Err(bad("unsupported dtype"));
    }
    let count = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    if u32_at(bytes, 20) != 3 {
        return Err(bad("expected 3 dims per sample"));
    }
    let shape = [
        u32_at(bytes, 24) as usize,
        u32_at(bytes, 28) as usize,
        u32_at(bytes, 32) as usize,
    ];
    let per = shape.iter().product::<usize>();
    let body = &bytes[HEADER_LEN..];
    if body.len() != count * per * 4 {
        return Err(bad(&format!(
            "expected {} payload bytes, found {}",
            count * per * 4,
            body.len()
        )));
    }
    let samples = body
        .chunks(per * 4)
        .map(|c| {
            c.chunks(4)
                .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
                .collect()
        })
        .collect();
    Ok((shape, samples))
}

pub fn feature_digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// SHA-256 of the manifest's canonical JSON. Covers the feature digest, so it
/// identifies the whole corpus.
pub fn manifest_digest(manifest: &Manifest) -> Result<String> {
    Ok(hex::encode(Sha256::digest(serde_json::to_vec(manifest)?)))
}

fn manifest_of(corpus: &Corpus, feature_sha256: String) -> Manifest {
    let count = |s| corpus.count(s);
    Manifest {
        format: "tdora-corpus".into(),
        version: FEATURE_VERSION,
        config: corpus.config.clone(),
        counts: SplitCounts {
            train: count(Split::Train),
            val: count(Split::Val),
            test: count(Split::Test),
        },
        answers: answer_strings().into_iter().map(String::from).collect(),
        vocabulary: corpus.vocab.clone(),
        feature_file: FEATURES_FILE.into(),
        feature_sha256,
        samples: corpus
            .samples
            .iter()
            .map(|s| SampleMeta {
                id: s.id,
                split: s.split,
                instance: s.instance,
                attribute: s.attribute,
                answer: s.answer,
                answer_text: s.answer.text().into(),
                template_id: s.template_id,
                phrasing: s.phrasing,
                question: s.question_text.clone(),
                question_tokens: s.question_tokens.clone(),
                events: s.events.clone(),
            })
            .collect(),
    }
}

/// Digest of the manifest `save_corpus` would write for `corpus`.
pub fn corpus_digest(corpus: &Corpus) -> Result<String> {
    manifest_digest(&manifest_of(
        corpus,
        feature_digest(&write_features(corpus)),
    ))
}

/// Writes `manifest.json` and `features.bin` into `dir`, creating it.
pub fn save_corpus(corpus: &Corpus, dir: &Path) -> Result<Manifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let bytes = write_features(corpus);
    let manifest = manifest_of(corpus, feature_digest(&bytes));
    let fpath = dir.join(FEATURES_FILE);
    fs::write(&fpath, &bytes).map_err(|e| Error::io(&fpath, e))?;
    let mpath = dir.join(MANIFEST_FILE);
    fs::write(&mpath, serde_json::to_vec_pretty(&manifest)?).map_err(|e| Error::io(&mpath, e))?;
    Ok(manifest)
}

pub fn load_corpus(dir: &Path) -> Result<(Corpus, Manifest)> {
    let mpath = dir.join(MANIFEST_FILE);
    let text = fs::read(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let mut manifest: Manifest = serde_json::from_slice(&text)?;
    manifest.vocabulary = manifest.vocabulary.reindexed();
    let fpath = dir.join(&manifest.feature_file);
    let bytes = fs::read(&fpath).map_err(|e| Error::io(&fpath, e))?;
    if feature_digest(&bytes) != manifest.feature_sha256 {
        return Err(Error::Format(format!(
            "{} does not match the manifest digest",
            fpath.display()
        )));
    }
    let (shape, features) = read_features(&bytes)?;
    let cfg = &manifest.config;
    if shape != [cfg.frames, cfg.patches, cfg.d_raw] || features.len() != manifest.samples.len() {
        return Err(Error::Format(
            "feature file shape disagrees with the manifest".into(),
        ));
    }
    let samples = manifest
        .samples
        .iter()
        .zip(features)
        .map(|(m, features)| ClipSample {
            id: m.id,
            split: m.split,
            instance: m.instance,
            features,
            events: m.events.clone(),
            attribute: m.attribute,
            answer: m.answer,
            template_id: m.template_id,
            phrasing: m.phrasing,
            question_text: m.question.clone(),
            question_tokens: m.question_tokens.clone(),
        })
        .collect();
    let corpus = Corpus {
        config: manifest.config.clone(),
        vocab: manifest.vocabulary.clone(),
        samples,
    };
    Ok((corpus, manifest))
}
