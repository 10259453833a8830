//! Experiment orchestration behind the `tdora` CLI: data generation,
//! backbone pretraining, adapter training, evaluation, diagnostics and
//! sweeps. Every run is fixed by an [`ExperimentConfig`].

mod ablate;
mod checkpoint;
mod config;
mod diagnostics;
mod evaluate;
mod run;
pub mod train;

pub use ablate::{
    ablate, ablation_csv, collect_runs, method_variants, operator_variants, summary_csv,
    AblationRow,
};
pub use checkpoint::{
    Checkpoint, CheckpointHeader, TensorEntry, MAGIC as CHECKPOINT_MAGIC,
    VERSION as CHECKPOINT_VERSION,
};
pub use config::{ExperimentConfig, PathsConfig, DEFAULT_OUT, OUT_ENV};
pub use diagnostics::{
    audit_csv, gradcheck_table, gradcheck_variants, param_audit, AuditRow, GradcheckRow,
    GRADCHECK_DIMS, GRADCHECK_EPS, GRADCHECK_HEADS, GRADCHECK_RANK, GRADCHECK_TOLERANCE,
};
pub use evaluate::{
    check_vocabulary, evaluate, predict, record_for, write_evaluation, Evaluation, OrderAccuracy,
};
pub use run::{
    build_backbone, generate_data, load_backbone, load_data, load_trained, model_dims, pretrain,
    train_run, RunReport, BEST_CHECKPOINT,
};
pub use train::{mean_loss, train, EpochLog, TrainConfig, TrainOutcome};
