//! Writes a generated corpus (`kb.tsv` plus train/dev/test TSVs) to a directory.
//!
//! cargo run --example synthetic_corpus -- /tmp/toy [seed]

use std::path::PathBuf;

use nsnet::data::Label;
use nsnet::synthetic::{Corpus, Sizes};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "toy-data".into()));
    let seed = args.next().map(|s| s.parse()).transpose()?.unwrap_or(7);
    let corpus = Corpus::generate(Sizes::default(), seed);
    corpus.write(&dir)?;
    let entails = corpus
        .train
        .iter()
        .filter(|p| p.label == Label::Entails)
        .count();
    println!(
        "wrote {} KB facts, {}/{}/{} examples ({} train entails) to {}",
        corpus.kb.len(),
        corpus.train.len(),
        corpus.dev.len(),
        corpus.test.len(),
        entails,
        dir.display()
    );
    for p in corpus.train.iter().take(3) {
        println!("  {} => {} [{}]", p.premise, p.hypothesis, p.label);
    }
    Ok(())
}
