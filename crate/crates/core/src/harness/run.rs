use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::checkpoint::Checkpoint;
use super::config::ExperimentConfig;
use super::evaluate::{evaluate, write_evaluation, Evaluation};
use super::train::{train, EpochLog};
use crate::adapters::ParamCount;
use crate::clipgen::{corpus_digest, generate_corpus, load_corpus, save_corpus, Corpus, Manifest};
use crate::error::{Error, Result};
use crate::toymodel::{pretrain_backbone, ModelDims, PretrainReport, ToyVqaModel};

pub const BEST_CHECKPOINT: &str = "best.tdck";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub config_hash: String,
    pub corpus_digest: String,
    pub adapter: String,
    pub epochs: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub checkpoint: PathBuf,
    pub param_count: ParamCount,
    pub evaluation: Evaluation,
    pub wall_time_secs: f64,
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, serde_json::to_string_pretty(value)?).map_err(|e| Error::io(path, e))
}

/// Model dimensions with the vocabulary size taken from the corpus.
pub fn model_dims(cfg: &ExperimentConfig, corpus: &Corpus) -> ModelDims {
    ModelDims {
        vocab_size: corpus.vocab.len(),
        ..cfg.model.clone()
    }
}

/// Generates the corpus and writes it under the configured corpus directory.
pub fn generate_data(cfg: &ExperimentConfig) -> Result<(Corpus, Manifest)> {
    let corpus = generate_corpus(&cfg.corpus)?;
    let manifest = save_corpus(&corpus, &cfg.corpus_dir())?;
    Ok((corpus, manifest))
}

/// Loads the configured corpus and checks it was generated from the same
/// corpus settings.
pub fn load_data(cfg: &ExperimentConfig) -> Result<(Corpus, Manifest)> {
    let (corpus, manifest) = load_corpus(&cfg.corpus_dir())?;
    if corpus.config != cfg.corpus {
        return Err(Error::Config(format!(
            "corpus in {} was generated with different settings",
            cfg.corpus_dir().display()
        )));
    }
    Ok((corpus, manifest))
}

/// Pretrains and freezes a backbone without touching the disk.
pub fn build_backbone(
    cfg: &ExperimentConfig,
    corpus: &Corpus,
) -> Result<(ToyVqaModel, PretrainReport)> {
    let mut model = ToyVqaModel::backbone(&model_dims(cfg, corpus), cfg.seed)?;
    let report = pretrain_backbone(&mut model, corpus, &cfg.pretrain, cfg.seed)?;
    Ok((model, report))
}

/// Pretrains the backbone, then writes its checkpoint and a JSON report
/// next to it.
pub fn pretrain(cfg: &ExperimentConfig, corpus: &Corpus) -> Result<(ToyVqaModel, PretrainReport)> {
    let (model, report) = build_backbone(cfg, corpus)?;
    let path = cfg.backbone_path();
    Checkpoint::of_model(&model, &cfg.backbone_hash()?).save(&path)?;
    write_json(&path.with_extension("json"), &report)?;
    Ok((model, report))
}

pub fn load_backbone(cfg: &ExperimentConfig) -> Result<ToyVqaModel> {
    let ck = Checkpoint::load(&cfg.backbone_path())?;
    ck.expect_hash(&cfg.backbone_hash()?)?;
    if ck.header.policy.is_some() {
        return Err(Error::Config(
            "backbone checkpoint already carries adapters".into(),
        ));
    }
    let model = ck.to_model()?;
    if model.store.count().0 != 0 {
        return Err(Error::Config("backbone checkpoint is not frozen".into()));
    }
    Ok(model)
}

/// Wraps a copy of `backbone`, trains it, evaluates the best weights and
/// writes checkpoint and reports into the run directory.
pub fn train_run(
    cfg: &ExperimentConfig,
    corpus: &Corpus,
    backbone: &ToyVqaModel,
) -> Result<(ToyVqaModel, RunReport)> {
    let start = Instant::now();
    let dir = cfg.run_dir();
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    write_json(&dir.join("config.json"), cfg)?;
    let hash = cfg.run_hash()?;
    let ck_path = dir.join(BEST_CHECKPOINT);

    let mut model = backbone.clone();
    model.wrap(&cfg.policy, cfg.seed)?;
    super::evaluate::check_vocabulary(&model, corpus)?;
    let outcome = train(&mut model, corpus, &cfg.train, cfg.seed, |m, log| {
        Checkpoint::of_model(m, &hash)
            .with_best(log.epoch, log.val_loss)
            .save(&ck_path)
    })?;
    let mut log = String::from("epoch\ttrain_loss\tval_loss\toptimizer_steps\n");
    for e in &outcome.epochs {
        let train = e
            .train_loss
            .map_or_else(|| "-".to_string(), |v| format!("{v:.8}"));
        log.push_str(&format!(
            "{}\t{train}\t{:.8}\t{}\n",
            e.epoch, e.val_loss, e.optimizer_steps
        ));
    }
    let log_path = dir.join("train.log");
    fs::write(&log_path, log).map_err(|e| Error::io(&log_path, e))?;

    let evaluation = evaluate(&model, corpus, None)?;
    write_evaluation(&evaluation, &dir, "metrics")?;
    let report = RunReport {
        seed: cfg.seed,
        config_hash: hash,
        corpus_digest: corpus_digest(corpus)?,
        adapter: cfg.policy.vision.label(),
        epochs: outcome.epochs,
        best_epoch: outcome.best_epoch,
        best_val_loss: outcome.best_val_loss,
        checkpoint: ck_path,
        param_count: ParamCount::of_store(&model.store),
        evaluation,
        wall_time_secs: start.elapsed().as_secs_f64(),
    };
    write_json(&dir.join("run.json"), &report)?;
    Ok((model, report))
}

/// Loads a trained checkpoint for `cfg`, checking its config hash.
pub fn load_trained(cfg: &ExperimentConfig, path: &Path) -> Result<(ToyVqaModel, Checkpoint)> {
    let ck = Checkpoint::load(path)?;
    ck.expect_hash(&cfg.run_hash()?)?;
    Ok((ck.to_model()?, ck))
}
