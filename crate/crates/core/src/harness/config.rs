use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::train::TrainConfig;
use crate::clipgen::CorpusConfig;
use crate::error::{Error, Result};
use crate::toymodel::{ModelDims, ModelPolicy, PretrainConfig};

/// Environment variable naming the directory relative output paths live under.
pub const OUT_ENV: &str = "TDORA_OUT";
pub const DEFAULT_OUT: &str = "runs";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Output root. Falls back to `$TDORA_OUT`, then `runs`.
    pub root: Option<PathBuf>,
    pub corpus: PathBuf,
    pub backbone: PathBuf,
    /// Run directory; defaults to the vision adapter's name.
    pub run: Option<PathBuf>,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            root: None,
            corpus: "corpus".into(),
            backbone: "backbone.tdck".into(),
            run: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Drives backbone init, pretraining, adapter init and shuffling.
    pub seed: u64,
    pub corpus: CorpusConfig,
    pub model: ModelDims,
    pub policy: ModelPolicy,
    pub pretrain: PretrainConfig,
    pub train: TrainConfig,
    pub paths: PathsConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            corpus: CorpusConfig::default(),
            model: ModelDims::default(),
            policy: ModelPolicy::default(),
            pretrain: PretrainConfig::default(),
            train: TrainConfig::default(),
            paths: PathsConfig::default(),
        }
    }
}

/// The part of a config that determines a backbone.
#[derive(Serialize)]
struct BackboneKey<'a> {
    seed: u64,
    corpus: &'a CorpusConfig,
    model: &'a ModelDims,
    pretrain: &'a PretrainConfig,
}

#[derive(Serialize)]
struct RunKey<'a> {
    backbone: BackboneKey<'a>,
    policy: &'a ModelPolicy,
    train: &'a TrainConfig,
}

fn sha256_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(hex::encode(Sha256::digest(serde_json::to_vec(value)?)))
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("experiment config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.corpus.validate()?;
        self.policy.vision.validate()?;
        self.policy.question.validate()?;
        self.train.validate()?;
        if self.model.patches != self.corpus.patches || self.model.d_raw != self.corpus.d_raw {
            return Err(Error::Config(format!(
                "model expects [{}, {}] frames but the corpus makes [{}, {}]",
                self.model.patches, self.model.d_raw, self.corpus.patches, self.corpus.d_raw
            )));
        }
        if self.model.frames < self.corpus.frames {
            return Err(Error::Config(format!(
                "corpus clips have {} frames, model accepts {}",
                self.corpus.frames, self.model.frames
            )));
        }
        Ok(())
    }

    /// Applies `key=value` overrides, where `key` is a dotted path into the
    /// JSON form (`train.epochs=2`, `policy.vision.kind=lora`). Values parse
    /// as JSON and fall back to plain strings.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut root = serde_json::to_value(self)?;
        for item in overrides {
            let item = item.as_ref().trim_start_matches("--");
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{item}` is not key=value")))?;
            let value =
                serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            set_path(&mut root, key, value)?;
        }
        let cfg: Self =
            serde_json::from_value(root).map_err(|e| Error::Config(format!("override: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn backbone_hash(&self) -> Result<String> {
        sha256_json(&self.backbone_key())
    }

    /// Hash of everything that determines a trained run; paths excluded.
    pub fn run_hash(&self) -> Result<String> {
        sha256_json(&RunKey {
            backbone: self.backbone_key(),
            policy: &self.policy,
            train: &self.train,
        })
    }

    fn backbone_key(&self) -> BackboneKey<'_> {
        BackboneKey {
            seed: self.seed,
            corpus: &self.corpus,
            model: &self.model,
            pretrain: &self.pretrain,
        }
    }

    pub fn root(&self) -> PathBuf {
        self.paths
            .root
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }

    fn under_root(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root().join(p)
        }
    }

    pub fn corpus_dir(&self) -> PathBuf {
        self.under_root(&self.paths.corpus)
    }

    pub fn backbone_path(&self) -> PathBuf {
        self.under_root(&self.paths.backbone)
    }

    pub fn run_dir(&self) -> PathBuf {
        let default = PathBuf::from(self.policy.vision.kind.name());
        self.under_root(self.paths.run.as_ref().unwrap_or(&default))
    }
}

fn set_path(root: &mut Value, key: &str, value: Value) -> Result<()> {
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node.as_object_mut().ok_or_else(|| {
            Error::Config(format!(
                "override key `{key}`: `{part}` is not inside an object"
            ))
        })?;
        if !obj.contains_key(*part) {
            return Err(Error::Config(format!(
                "override key `{key}`: unknown field `{part}`"
            )));
        }
        if i + 1 == parts.len() {
            obj.insert((*part).to_string(), value);
            return Ok(());
        }
        node = obj.get_mut(*part).expect("checked above");
    }
    Err(Error::Config("empty override key".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapters::AdapterKind;

    #[test]
    fn default_round_trips_through_json() {
        let cfg = ExperimentConfig::default();
        assert_eq!(
            ExperimentConfig::from_json(&cfg.to_json().unwrap()).unwrap(),
            cfg
        );
    }

    #[test]
    fn dotted_overrides() {
        let cfg = ExperimentConfig::default()
            .with_overrides(&[
                "--train.epochs=3",
                "policy.vision.kind=lora",
                "seed=99",
                "paths.root=/tmp/x",
            ])
            .unwrap();
        assert_eq!(cfg.train.epochs, 3);
        assert_eq!(cfg.policy.vision.kind, AdapterKind::Lora);
        assert_eq!(cfg.seed, 99);
        assert_eq!(cfg.run_dir(), PathBuf::from("/tmp/x/lora"));
    }

    #[test]
    fn bad_overrides_are_config_errors() {
        let cfg = ExperimentConfig::default();
        for bad in [
            "train.epoch=3",
            "train",
            "seed=abc",
            "train.epochs.x=1",
            "policy.vision.kind=nope",
        ] {
            assert!(
                matches!(cfg.with_overrides(&[bad]), Err(Error::Config(_))),
                "{bad}"
            );
        }
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"sede": 1}"#).is_err());
    }

    #[test]
    fn hashes_ignore_paths_and_track_settings() {
        let a = ExperimentConfig::default();
        let b = a.with_overrides(&["paths.root=/elsewhere"]).unwrap();
        let c = a.with_overrides(&["train.epochs=1"]).unwrap();
        assert_eq!(a.run_hash().unwrap(), b.run_hash().unwrap());
        assert_ne!(a.run_hash().unwrap(), c.run_hash().unwrap());
        assert_eq!(a.backbone_hash().unwrap(), c.backbone_hash().unwrap());
    }

    #[test]
    fn mismatched_model_and_corpus_are_rejected() {
        let cfg = ExperimentConfig::default();
        assert!(cfg.with_overrides(&["model.patches=3"]).is_err());
        assert!(cfg.with_overrides(&["model.frames=4"]).is_err());
    }
}
