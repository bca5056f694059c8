//! Builds an index over a handful of tuples and scores sub-facts against it.
//!
//! cargo run --example kb_lookup

use nsnet::decompose::{FactSource, SubFact};
use nsnet::kb::{lookup, FieldScorer, InvertedIndex, KbTuple};

fn main() -> anyhow::Result<()> {
    let facts = [
        ("hydrogen", "is", "element"),
        ("hydrogen", "is", "gas"),
        ("helium", "is", "noble gas"),
        ("water", "contains", "hydrogen"),
        ("aorta", "is", "artery"),
        ("heart", "pumps", "blood"),
    ];
    let tuples = facts
        .iter()
        .enumerate()
        .map(|(i, (s, p, o))| KbTuple::parse(i as u32, s, p, o))
        .collect::<nsnet::Result<Vec<_>>>()?;
    let index = InvertedIndex::build(tuples)?;

    let queries = [
        ("hydrogen", "is", "an element"),
        ("the aorta", "is", "a major artery"),
        ("rocks", "contain", "iron"),
    ];
    for (s, p, o) in queries {
        let fact = SubFact::parse(s, p, o, FactSource::External)?;
        println!("{}", fact.text());
        for (label, scorer) in [
            ("tuplized", FieldScorer::word_over(true)),
            ("flat", FieldScorer::word_over(false)),
        ] {
            let r = lookup(&fact, &index, &scorer, 4);
            let best = r
                .best()
                .and_then(|id| index.tuple(id))
                .map_or("(no KB match)".to_string(), |t| t.display());
            println!(
                "  {label:<9} l {:.4}  emb {:?}  best {best}",
                r.l_score,
                r.emb.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>()
            );
        }
    }
    Ok(())
}
