use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tdora::adapters::{AdapterConfig, AdapterKind, OperatorKind};
use tdora::harness::{
    self, ablate, ablation_csv, audit_csv, collect_runs, evaluate, gradcheck_table,
    gradcheck_variants, load_backbone, load_data, load_trained, method_variants, operator_variants,
    param_audit, summary_csv, write_evaluation, ExperimentConfig, BEST_CHECKPOINT,
};
use tdora::textmetrics::{aggregate, read_predictions, report_csv, write_report, Phrasing};
use tdora::{Error, Result};

#[derive(Parser)]
#[command(
    name = "tdora",
    version,
    about = "Temporal low-rank adapter laboratory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Trailing `--dotted.key=value` overrides, e.g. `--train.epochs=2`.
    #[arg(
        allow_hyphen_values = true,
        trailing_var_arg = true,
        value_name = "KEY=VALUE"
    )]
    overrides: Vec<String>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let base = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        base.with_overrides(&self.overrides)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic clip corpus.
    GenerateData {
        #[command(flatten)]
        common: Common,
    },
    /// Pretrain and freeze the toy backbone.
    Pretrain {
        #[command(flatten)]
        common: Common,
    },
    /// Train the configured adapters on the frozen backbone.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Score a checkpoint on the test split, or score a predictions file.
    Evaluate {
        /// Defaults to the run directory's best checkpoint.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// `in`, `out` or `all`.
        #[arg(long, default_value = "all")]
        split: String,
        /// Score `prediction<TAB>reference<TAB>phrasing<TAB>type` lines instead.
        #[arg(long)]
        predictions: Option<PathBuf>,
        /// Directory for the report files; defaults to the run directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Finite-difference check of every adapter variant.
    Gradcheck {
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Trainable and frozen parameter counts per method.
    ParamAudit {
        /// Comma-separated adapter kinds.
        #[arg(
            long,
            default_value = "lora,dora,st-adapter,temporal-dora,lora+mha,dora+mha"
        )]
        methods: String,
        #[command(flatten)]
        common: Common,
    },
    /// Train a list of variants under one seed and schedule.
    Ablate {
        /// Comma-separated temporal operators for the temporal DoRA adapter.
        #[arg(long, conflicts_with = "methods")]
        operators: Option<String>,
        /// Comma-separated adapter kinds.
        #[arg(long)]
        methods: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Summarise every finished run under the output root.
    Report {
        #[command(flatten)]
        common: Common,
    },
}

fn parse_list<T: std::str::FromStr<Err = Error>>(list: &str) -> Result<Vec<T>> {
    let items = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect::<Result<Vec<T>>>()?;
    if items.is_empty() {
        return Err(Error::Config("empty list".into()));
    }
    Ok(items)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn phrasing_filter(split: &str) -> Result<Option<Phrasing>> {
    match split {
        "all" => Ok(None),
        other => other.parse().map(Some),
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::GenerateData { common } => {
            let cfg = common.load()?;
            let (corpus, manifest) = harness::generate_data(&cfg)?;
            println!(
                "wrote {} samples to {} (manifest {})",
                corpus.samples.len(),
                cfg.corpus_dir().display(),
                tdora::clipgen::manifest_digest(&manifest)?
            );
        }
        Command::Pretrain { common } => {
            let cfg = common.load()?;
            let (corpus, _) = load_data(&cfg)?;
            let (model, report) = harness::pretrain(&cfg, &corpus)?;
            let (trainable, frozen) = model.store.count();
            println!(
                "backbone {} frame_acc {:.4} question_acc {:.4} trainable {trainable} frozen {frozen}",
                cfg.backbone_path().display(),
                report.frame_accuracy,
                report.question_accuracy
            );
        }
        Command::Train { common } => {
            let cfg = common.load()?;
            let (corpus, _) = load_data(&cfg)?;
            let backbone = load_backbone(&cfg)?;
            let (_, report) = harness::train_run(&cfg, &corpus, &backbone)?;
            for e in &report.epochs {
                eprintln!("epoch {:>2} val_loss {:.6}", e.epoch, e.val_loss);
            }
            println!(
                "{}: best epoch {} val_loss {:.6}, checkpoint {}",
                report.adapter,
                report.best_epoch,
                report.best_val_loss,
                report.checkpoint.display()
            );
            print!("{}", report_csv(&report.evaluation.report));
        }
        Command::Evaluate {
            checkpoint,
            split,
            predictions,
            out,
            common,
        } => {
            let cfg = common.load()?;
            let filter = phrasing_filter(&split)?;
            let out = out.unwrap_or_else(|| cfg.run_dir());
            if let Some(path) = predictions {
                let records: Vec<_> = read_predictions(&path)?
                    .into_iter()
                    .filter(|r| filter.map_or(true, |f| r.phrasing == f))
                    .collect();
                let report = aggregate(&records);
                write_report(&report, &out, "scored")?;
                print!("{}", report_csv(&report));
                return Ok(ExitCode::SUCCESS);
            }
            let path = checkpoint.unwrap_or_else(|| cfg.run_dir().join(BEST_CHECKPOINT));
            let (corpus, _) = load_data(&cfg)?;
            let (model, _) = load_trained(&cfg, &path)?;
            let eval = evaluate(&model, &corpus, filter)?;
            write_evaluation(&eval, &out, "evaluation")?;
            print!("{}", report_csv(&eval.report));
            for (name, o) in [
                ("in_template", &eval.order_in_template),
                ("out_of_template", &eval.order_out_of_template),
            ] {
                if let Some(o) = o {
                    println!(
                        "order-dependent {name}: {:.4} over {} (chance {} ± {:.4})",
                        o.accuracy, o.count, o.chance, o.sigma
                    );
                }
            }
        }
        Command::Gradcheck { seeds, common } => {
            let cfg = common.load()?;
            let seeds: Vec<u64> = (0..seeds).map(|i| cfg.seed + i).collect();
            let rows = gradcheck_variants(&seeds)?;
            print!("{}", gradcheck_table(&rows));
            if rows.iter().any(|r| !r.pass) {
                return Ok(ExitCode::from(2));
            }
        }
        Command::ParamAudit { methods, common } => {
            let cfg = common.load()?;
            let methods: Vec<AdapterConfig> = parse_list::<AdapterKind>(&methods)?
                .into_iter()
                .map(|kind| AdapterConfig {
                    kind,
                    ..cfg.policy.vision.clone()
                })
                .collect();
            let dims = tdora::toymodel::ModelDims {
                vocab_size: tdora::clipgen::Vocab::from_template_bank().len(),
                ..cfg.model.clone()
            };
            let rows = param_audit(&dims, &cfg.policy.question, &methods)?;
            let csv = audit_csv(&rows);
            write_text(&cfg.root().join("param_audit.csv"), &csv)?;
            print!("{csv}");
        }
        Command::Ablate {
            operators,
            methods,
            common,
        } => {
            let cfg = common.load()?;
            let variants = match (operators, methods) {
                (Some(ops), None) => {
                    operator_variants(&cfg.policy.vision, &parse_list::<OperatorKind>(&ops)?)
                }
                (None, Some(m)) => {
                    method_variants(&cfg.policy.vision, &parse_list::<AdapterKind>(&m)?)
                }
                _ => {
                    return Err(Error::Config(
                        "ablate needs --operators or --methods".into(),
                    ))
                }
            };
            let (corpus, _) = load_data(&cfg)?;
            let backbone = load_backbone(&cfg)?;
            let rows = ablate(&cfg, &corpus, &backbone, &variants)?;
            let csv = ablation_csv(&rows);
            let sweep = cfg
                .paths
                .run
                .clone()
                .unwrap_or_else(|| PathBuf::from("ablate"));
            write_text(&cfg.root().join(sweep).join("ablation.csv"), &csv)?;
            print!("{csv}");
        }
        Command::Report { common } => {
            let cfg = common.load()?;
            let root = cfg.root();
            let runs = collect_runs(&root)?;
            let csv = summary_csv(&runs);
            write_text(&root.join("summary.csv"), &csv)?;
            print!("{csv}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
