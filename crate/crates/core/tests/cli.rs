use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: [&str; 6] = [
    "--corpus.train=48",
    "--corpus.val=12",
    "--corpus.test_instances=12",
    "--pretrain.steps=30",
    "--train.epochs=1",
    "--train.grad_accum=4",
];

fn tdora(root: &Path, args: &[&str]) -> Output {
    let mut all: Vec<String> = args.iter().map(|s| s.to_string()).collect();
    all.extend(TINY.iter().map(|s| s.to_string()));
    Command::new(env!("CARGO_BIN_EXE_tdora"))
        .args(&all)
        .env("TDORA_OUT", root)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn read(path: &Path) -> Vec<u8> {
    fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn full_pipeline_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("fresh/out");

    ok(&tdora(&root, &["generate-data"]));
    let manifest = read(&root.join("corpus/manifest.json"));
    ok(&tdora(&root, &["generate-data"]));
    assert_eq!(read(&root.join("corpus/manifest.json")), manifest);

    let out = ok(&tdora(&root, &["pretrain"]));
    assert!(out.contains("trainable 0 "), "{out}");
    assert!(root.join("backbone.tdck").exists());

    let out = ok(&tdora(&root, &["train"]));
    assert!(out.starts_with("temporal-dora/mha: best epoch"), "{out}");
    let run = root.join("temporal-dora");
    for f in [
        "best.tdck",
        "run.json",
        "config.json",
        "train.log",
        "metrics.json",
        "metrics.csv",
        "metrics.predictions.tsv",
    ] {
        assert!(run.join(f).exists(), "{f}");
    }

    ok(&tdora(&root, &["evaluate"]));
    let first = read(&run.join("evaluation.json"));
    ok(&tdora(&root, &["evaluate"]));
    assert_eq!(read(&run.join("evaluation.json")), first);
    assert_eq!(read(&run.join("metrics.json")), first);

    let out = ok(&tdora(&root, &["evaluate", "--split", "out"]));
    assert!(!out.contains("in_template,"), "{out}");

    let out = ok(&tdora(&root, &["report"]));
    assert_eq!(out.lines().count(), 2, "{out}");
    assert!(root.join("summary.csv").exists());
}

#[test]
fn oracle_predictions_score_one() {
    // METEOR keeps its one-chunk penalty on exact matches: 0.5 * (1/m)^3.
    let meteor = |m: f64| 1.0 - 0.5 / (m * m * m);
    let dir = tempfile::tempdir().unwrap();
    let tsv = dir.path().join("oracle.tsv");
    fs::write(
        &tsv,
        "a tool is visible\ta tool is visible\tin_template\ttool\n\
         the scope is advancing\tthe scope is advancing\tout_of_template\tmotion\n",
    )
    .unwrap();
    let out = ok(&tdora(
        dir.path(),
        &["evaluate", "--predictions", tsv.to_str().unwrap()],
    ));
    for line in out.lines().skip(1).filter(|l| !l.starts_with("gap")) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[3], "1.000000", "{line}");
        assert_eq!(cells[4], "1.000000", "{line}");
        assert_eq!(cells[5], format!("{:.6}", meteor(4.0)), "{line}");
        assert_eq!(cells[6], "1.000000", "{line}");
    }
}

#[test]
fn train_without_inputs_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = tdora(dir.path(), &["train"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error: i/o error"));
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, b"x").unwrap();
    let out = tdora(&blocker.join("sub"), &["generate-data"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("i/o error"));
}

#[test]
fn unknown_override_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = tdora(dir.path(), &["generate-data", "--corpus.trian=3"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown field `trian`"));
}

#[test]
fn param_audit_and_gradcheck_commands() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&tdora(
        dir.path(),
        &["param-audit", "--methods", "temporal-dora,st-adapter,none"],
    ));
    let rows: Vec<Vec<&str>> = out
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    let ratio = |r: &Vec<&str>| r[3].parse::<f64>().unwrap();
    assert!(ratio(&rows[0]) < ratio(&rows[1]));
    assert_eq!(ratio(&rows[2]), 0.0);

    let out = ok(&tdora(dir.path(), &["gradcheck", "--seeds", "1"]));
    assert!(out.lines().skip(1).all(|l| l.ends_with("pass")), "{out}");
}

#[test]
fn ablation_sweep_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    ok(&tdora(root, &["generate-data"]));
    ok(&tdora(root, &["pretrain"]));
    let sweep = |name: &str| {
        let run = format!("--paths.run={name}");
        let out = ok(&tdora(
            root,
            &[
                "ablate",
                "--methods",
                "lora,lora+mha,dora,dora+mha,temporal-dora",
                &run,
            ],
        ));
        assert_eq!(out.lines().count(), 6, "{out}");
        read(&root.join(name).join("ablation.csv"))
    };
    assert_eq!(sweep("a"), sweep("b"));
}
