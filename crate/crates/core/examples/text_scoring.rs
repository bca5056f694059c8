//! Tokenization and the overlap scores the symbolic modules are built on.
//!
//! cargo run --example text_scoring

use nsnet::decompose::{FactSource, SubFact};
use nsnet::matcher::symbolic_match;
use nsnet::text::{asym_overlap, jaccard, join, normalize_tokenize, TokenSet};

fn main() -> anyhow::Result<()> {
    let premise = "The heart pumps blood through the aorta, the body's largest artery.";
    let hypothesis = "The aorta is a major artery.";
    let p = normalize_tokenize(premise, 40);
    let h = normalize_tokenize(hypothesis, 25);
    println!("premise tokens:    {}", join(&p));
    println!("hypothesis tokens: {}", join(&h));

    let ps: TokenSet = p.iter().collect();
    let hs: TokenSet = h.iter().collect();
    println!("jaccard(h, p)      {:.4}", jaccard(&hs, &ps));
    println!("asym_overlap(h, p) {:.4}", asym_overlap(&hs, &ps));
    println!("asym_overlap(p, h) {:.4}", asym_overlap(&ps, &hs));

    let fact = SubFact::parse("the aorta", "is", "a major artery", FactSource::External)?;
    println!("matcher m(fact, p) {:.4}", symbolic_match(&fact, &p));
    Ok(())
}
