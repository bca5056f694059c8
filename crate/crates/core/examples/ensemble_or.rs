//! The training-free ensemble: per-sub-fact probabilistic OR, averaged.
//!
//! cargo run --example ensemble_or

use nsnet::ensemble::{combine_fact, ensemble_predict, CombineMode, FactScores};

fn main() -> nsnet::Result<()> {
    let rows = [(0.47, 0.0, 0.07), (0.43, 0.0, 0.12), (0.2, 0.1, 0.0)];
    println!("   n     m     l      or     and");
    for (n, m, l) in rows {
        println!(
            "{n:.2}  {m:.2}  {l:.2}  {:.4}  {:.4}",
            combine_fact(n, m, l, CombineMode::Or)?,
            combine_fact(n, m, l, CombineMode::And)?
        );
    }
    let facts: Vec<FactScores> = rows
        .iter()
        .map(|&(n, m, l)| FactScores { n, m, l })
        .collect();
    for k in 1..=facts.len() {
        let (entails, p) = ensemble_predict(&facts[..k], CombineMode::Or, 0.5)?;
        println!("first {k} sub-facts: mean {p:.4} -> entails {entails}");
    }
    Ok(())
}
