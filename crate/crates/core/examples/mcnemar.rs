//! Exact McNemar test on paired predictions.
//!
//! cargo run --example mcnemar

use nsnet::data::Label::{Entails as E, Neutral as N};
use nsnet::eval::{discordant, mcnemar_exact, mcnemar_test};

fn main() -> nsnet::Result<()> {
    let gold = [E, E, N, N, E, N, E, E, N, E, N, E];
    let a = [E, E, N, N, E, N, E, E, N, E, N, N];
    let b = [N, E, E, N, N, N, E, N, N, E, E, N];
    let (only_a, only_b) = discordant(&a, &b, &gold)?;
    println!("a right/b wrong {only_a}, a wrong/b right {only_b}");
    println!("p = {:.5}", mcnemar_test(&a, &b, &gold)?);
    for (b, c) in [(10, 0), (1, 1), (5, 1), (30, 12), (400, 350)] {
        println!("b={b:<3} c={c:<3} p={:.6}", mcnemar_exact(b, c));
    }
    Ok(())
}
