use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use nsnet::aggregator::{Ablation, ModelDims};
use nsnet::config::RunConfig;
use nsnet::data::Split;
use nsnet::ensemble::{combine_fact, CombineMode};
use nsnet::eval::{EvalReport, ModelKind};
use nsnet::explain::NO_MATCH;
use nsnet::pipeline::{Pipeline, NSNET, PRETRAINED};
use nsnet::synthetic::{Corpus, Sizes};
use nsnet::Error;

fn small_config(data: &Path, work: PathBuf) -> RunConfig {
    let mut cfg = RunConfig {
        dims: ModelDims {
            embed_dim: 16,
            hidden: 12,
            hybrid: 8,
            compose: 8,
            max_facts: 5,
            top_k: 10,
        },
        ..RunConfig::default()
    }
    .with_seed(17);
    cfg.pretrain.epochs = 3;
    cfg.pretrain.adam.lr = 0.005;
    cfg.joint.epochs = 3;
    cfg.joint.adam.lr = 0.002;
    cfg.paths.data_dir = data.to_path_buf();
    cfg.paths.work_dir = work;
    cfg
}

fn write_corpus(dir: &Path) {
    let sizes = Sizes {
        train: 120,
        dev: 20,
        test: 30,
        kb_facts_per_subject: 3,
    };
    Corpus::generate(sizes, 8).write(dir).unwrap();
}

struct Run {
    pretrained: Vec<u8>,
    nsnet: Vec<u8>,
    reports: Vec<EvalReport>,
}

fn run(data: &Path, work: PathBuf) -> (Pipeline, Run) {
    let p = Pipeline::new(small_config(data, work)).unwrap();
    p.index(&data.join("kb.tsv")).unwrap();
    p.pretrain().unwrap();
    p.train().unwrap();
    let reports = [
        ModelKind::Majority,
        ModelKind::NeuralBase,
        ModelKind::NeuralDecomposed,
        ModelKind::Ensemble,
        ModelKind::Nsnet,
    ]
    .into_iter()
    .map(|m| p.evaluate(m, Split::Test, Ablation::NONE).unwrap())
    .collect();
    let run = Run {
        pretrained: fs::read(p.artifact(PRETRAINED)).unwrap(),
        nsnet: fs::read(p.artifact(NSNET)).unwrap(),
        reports,
    };
    (p, run)
}

#[test]
fn seeded_runs_are_bit_identical_and_reports_self_audit() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    write_corpus(&data);
    let (p, a) = run(&data, dir.path().join("a"));
    let (_, b) = run(&data, dir.path().join("b"));
    assert_eq!(a.pretrained, b.pretrained);
    assert_eq!(a.nsnet, b.nsnet);
    for (ra, rb) in a.reports.iter().zip(&b.reports) {
        assert_eq!(ra.predictions, rb.predictions, "{}", ra.model.name());
        assert_eq!(ra.accuracy, ra.recomputed_accuracy());
        assert_eq!(ra.total, 30);
    }

    // saved reports round-trip and carry the config
    let saved = p
        .artifact("reports")
        .join(format!("{}.json", a.reports[4].tag()));
    let loaded = EvalReport::load(&saved).unwrap();
    assert_eq!(loaded.predictions, a.reports[4].predictions);
    assert_eq!(loaded.config, p.config);

    // paired comparison against the neural base
    let mut nsnet = a.reports[4].clone();
    nsnet.compare_with(&a.reports[1]).unwrap();
    let cmp = nsnet.comparison.unwrap();
    assert!((0.0..=1.0).contains(&cmp.p_value));
}

#[test]
fn ablation_and_explanations() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    write_corpus(&data);
    let (p, _) = run(&data, dir.path().join("w"));

    let ablated = p
        .evaluate(ModelKind::Nsnet, Split::Test, Ablation::BOTH)
        .unwrap();
    assert_eq!(ablated.ablation, Ablation::BOTH);
    assert_eq!(ablated.tag(), "nsnet-test-no-symbolic");

    for i in 0..10 {
        let e = p.explain(&format!("test-{i}")).unwrap();
        assert!(!e.facts.is_empty());
        let text = e.to_text();
        assert_eq!(text.matches("\n    kb ").count(), e.facts.len());
        for f in &e.facts {
            assert_eq!(
                f.combined,
                combine_fact(f.n, f.m, f.l, CombineMode::Or).unwrap()
            );
            if f.l == 0.0 {
                assert!(f.best_tuple.is_none());
            }
        }
        assert_eq!(
            text.matches(NO_MATCH).count(),
            e.facts.iter().filter(|f| f.best_tuple.is_none()).count()
        );
        assert!(e.nsnet_prob.is_some());
    }
    assert!(matches!(p.explain("test-999"), Err(Error::NotFound(_))));
    assert!(matches!(p.explain("bogus"), Err(Error::NotFound(_))));

    let pred = p
        .predict(
            "plants produce oxygen and need light.",
            "plants produce oxygen.",
        )
        .unwrap();
    assert!(pred.gold.is_none());
    assert!(pred.facts[0].m > 0.0);
}

#[test]
fn missing_artifacts_are_configuration_errors() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    write_corpus(&data);
    let p = Pipeline::new(small_config(&data, dir.path().join("w"))).unwrap();
    assert!(matches!(p.train(), Err(Error::Config(_))));
    assert!(matches!(
        p.evaluate(ModelKind::Nsnet, Split::Test, Ablation::NONE),
        Err(Error::Config(_))
    ));
    // majority needs no artifacts
    let maj = p
        .evaluate(ModelKind::Majority, Split::Test, Ablation::NONE)
        .unwrap();
    assert_eq!(maj.accuracy, maj.recomputed_accuracy());
}

#[test]
fn decompositions_replay_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    write_corpus(&data);
    let p = Pipeline::new(small_config(&data, dir.path().join("w"))).unwrap();
    let written = p.decompose(Split::Dev).unwrap();
    let mut cfg = p.config.clone();
    cfg.paths.decompositions = Some(written);
    let replayed = Pipeline::new(cfg).unwrap().load_split(Split::Dev).unwrap();
    let original = p.load_split(Split::Dev).unwrap();
    for (a, b) in original.iter().zip(&replayed) {
        let flat = |e: &nsnet::data::EntailExample| {
            e.sub_facts
                .iter()
                .map(|f| f.flat.clone())
                .collect::<Vec<_>>()
        };
        assert_eq!(flat(a), flat(b));
    }
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_nsnet"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

#[test]
fn cli_reports_errors_with_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    write_corpus(&data);
    let cfg = small_config(&data, dir.path().join("w"));
    let cfg_path = dir.path().join("cfg.json");
    fs::write(&cfg_path, cfg.to_json()).unwrap();
    let cfg_arg = cfg_path.to_str().unwrap();

    let out = cli(&["--config", cfg_arg, "train"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("config"));

    let kb = data.join("kb.tsv");
    let out = cli(&["--config", cfg_arg, "index", kb.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let out = cli(&[
        "--config", cfg_arg, "eval", "--model", "majority", "--split", "test",
    ]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("accuracy"));

    let out = cli(&[
        "--config", cfg_arg, "eval", "--model", "majority", "--split", "nope",
    ]);
    assert_eq!(out.status.code(), Some(2));

    let bad_kb = dir.path().join("bad.tsv");
    fs::write(&bad_kb, "only\ttwo\n").unwrap();
    let out = cli(&["--config", cfg_arg, "index", bad_kb.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.tsv:1:"));
}
