//! The attend/compare/aggregate entailment network on its own: trains on
//! whole synthetic pairs and prints attention for one pair.
//!
//! cargo run --release --example entailment_network

use nsnet::autodiff::{Graph, ParamStore};
use nsnet::data::EntailExample;
use nsnet::embedding::EmbeddingTable;
use nsnet::entail::{entail_forward, init_params, EncodedPair, EntailDims, EntailObjective};
use nsnet::synthetic::{Corpus, Sizes};
use nsnet::text::Vocabulary;
use nsnet::train::{accuracy, fit, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> anyhow::Result<()> {
    let corpus = Corpus::generate(Sizes::default(), 3);
    let load = |pairs: &[nsnet::synthetic::Pair], tag: &str| {
        pairs
            .iter()
            .enumerate()
            .map(|(i, p)| {
                EntailExample::new(format!("{tag}-{i}"), &p.premise, &p.hypothesis, p.label)
            })
            .collect::<nsnet::Result<Vec<_>>>()
    };
    let train = load(&corpus.train, "train")?;
    let test = load(&corpus.test, "test")?;
    let vocab = Vocabulary::build(
        train
            .iter()
            .flat_map(|e| e.premise_tokens.iter().chain(&e.hypothesis_tokens)),
        30_000,
    );
    let encode = |xs: &[EntailExample]| nsnet::pipeline::encode_pairs(&vocab, xs);
    let (train_x, test_x): (Vec<EncodedPair>, Vec<EncodedPair>) = (encode(&train), encode(&test));

    let dims = EntailDims {
        embed_dim: 32,
        hidden: 32,
    };
    let mut params = ParamStore::new(3);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    init_params(
        &mut params,
        &EmbeddingTable::random(&vocab, 32, 3),
        dims,
        &mut rng,
    )?;

    let obj = EntailObjective { dropout: 0.1 };
    let mut cfg = TrainConfig {
        epochs: 10,
        ..TrainConfig::default()
    };
    cfg.adam.lr = 0.005;
    let out = fit(&obj, params, &train_x, &test_x, &cfg)?;
    println!(
        "best epoch {}, test accuracy {:.3}",
        out.best_epoch,
        accuracy(&obj, &out.best, &test_x)?
    );

    let ex = &test[0];
    let x = &test_x[0];
    let mut g = Graph::new(&out.best);
    let v = entail_forward(&mut g, &x.fact_ids, &x.premise_ids, 0.0)?;
    println!("\n{} => {} [{}]", ex.premise, ex.hypothesis, ex.gold);
    println!("p(entails) = {:.3}", g.value(v.n_prob).item());
    let attn = g.value(v.attn_fact);
    for (i, t) in ex.hypothesis_tokens.iter().enumerate() {
        let row = attn.row(i);
        let (j, w) = row
            .iter()
            .enumerate()
            .fold((0, 0.0), |b, (j, &w)| if w > b.1 { (j, w) } else { b });
        println!(
            "  {:<10} attends to {:<10} ({w:.2})",
            t.as_str(),
            ex.premise_tokens[j].as_str()
        );
    }
    Ok(())
}
