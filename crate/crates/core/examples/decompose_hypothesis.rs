//! Splits hypotheses into subject/predicate/object sub-facts.
//!
//! cargo run --example decompose_hypothesis -- "Plants make food and release oxygen."

use nsnet::decompose::decompose;
use nsnet::text::join;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let inputs = if args.is_empty() {
        vec![
            "hydrogen is an element".to_string(),
            "a cell wall is found in a plant cell but not in an animal cell".to_string(),
            "binary fission is a form of cell division in prokaryotic organisms that produces identical offspring".to_string(),
            "Plants make food and release oxygen.".to_string(),
        ]
    } else {
        args
    };
    for text in &inputs {
        println!("{text}");
        for f in decompose(text) {
            println!(
                "  ({}; {}; {})",
                join(&f.subject),
                join(&f.predicate),
                join(&f.object)
            );
        }
    }
}
