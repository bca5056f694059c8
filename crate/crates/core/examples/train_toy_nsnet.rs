//! The whole workflow on a generated corpus: index the KB, pretrain the
//! entailment network, train NSnet jointly, evaluate every model on the
//! test split with a significance test, and explain one example.
//!
//! cargo run --release --example train_toy_nsnet -- [work-dir]

use std::path::PathBuf;

use nsnet::aggregator::{Ablation, ModelDims};
use nsnet::config::RunConfig;
use nsnet::data::Split;
use nsnet::eval::ModelKind;
use nsnet::pipeline::Pipeline;
use nsnet::synthetic::{Corpus, Sizes};

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let work = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("nsnet-toy"));
    let data = work.join("data");
    Corpus::generate(Sizes::default(), 11).write(&data)?;

    let mut cfg = RunConfig {
        dims: ModelDims {
            embed_dim: 32,
            hidden: 32,
            hybrid: 16,
            compose: 16,
            top_k: 10,
            ..ModelDims::default()
        },
        ..RunConfig::default()
    }
    .with_seed(11);
    cfg.pretrain.epochs = 30;
    cfg.pretrain.adam.lr = 0.005;
    cfg.joint.epochs = 40;
    cfg.joint.adam.lr = 0.01;
    cfg.paths.data_dir = data.clone();
    cfg.paths.work_dir = work.join("artifacts");
    let p = Pipeline::new(cfg)?;

    let idx = p.index(&data.join("kb.tsv"))?;
    println!("indexed {} tuples", idx.loaded);
    let pre = p.pretrain()?;
    println!("pretrained, best epoch {}", pre.best_epoch);
    let joint = p.train()?;
    println!("trained NSnet, best epoch {}\n", joint.best_epoch);

    let base = p.evaluate(ModelKind::NeuralBase, Split::Test, Ablation::NONE)?;
    for (model, ablation) in [
        (ModelKind::Majority, Ablation::NONE),
        (ModelKind::NeuralBase, Ablation::NONE),
        (ModelKind::NeuralDecomposed, Ablation::NONE),
        (ModelKind::Ensemble, Ablation::NONE),
        (ModelKind::Nsnet, Ablation::NONE),
        (ModelKind::Nsnet, Ablation::BOTH),
    ] {
        let mut r = p.evaluate(model, Split::Test, ablation)?;
        let vs = if model == ModelKind::NeuralBase {
            String::new()
        } else {
            r.compare_with(&base)?;
            let c = r.comparison.as_ref().expect("just compared");
            format!("  vs neural_base {:+.3} (p = {:.4})", c.delta, c.p_value)
        };
        println!("{:<32} {:.3}{vs}", r.tag(), r.accuracy);
    }

    println!("\n{}", p.explain("test-0")?.to_text());
    println!("artifacts in {}", work.display());
    Ok(())
}
