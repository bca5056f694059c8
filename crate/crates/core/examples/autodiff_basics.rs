//! Fits a two-layer network to XOR with the tape-based autodiff and Adam.
//!
//! cargo run --example autodiff_basics

use nsnet::autodiff::{Adam, AdamConfig, Grads, Graph, ParamStore, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> nsnet::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut params = ParamStore::new(1);
    params.add_xavier("l1.w", 2, 8, &mut rng)?;
    params.add_zeros("l1.b", 1, 8)?;
    params.add_xavier("l2.w", 8, 2, &mut rng)?;
    params.add_zeros("l2.b", 1, 2)?;

    let data = [
        ([0.0, 0.0], 0),
        ([0.0, 1.0], 1),
        ([1.0, 0.0], 1),
        ([1.0, 1.0], 0),
    ];
    let mut adam = Adam::new(AdamConfig {
        lr: 0.05,
        ..AdamConfig::default()
    });
    for step in 0..=300 {
        let mut grads = Grads::new(&params);
        let mut total = 0.0;
        for (x, y) in &data {
            let mut g = Graph::new(&params);
            let x = g.input(Tensor::row_vector(x.to_vec()))?;
            let h = g.linear(x, "l1")?;
            let h = g.tanh(h)?;
            let logits = g.linear(h, "l2")?;
            let loss = g.cross_entropy(logits, *y)?;
            total += g.value(loss).item();
            g.backward(loss, &mut grads, 0.25)?;
        }
        let norm = adam.step(&mut params, &mut grads)?;
        if step % 50 == 0 {
            println!(
                "step {step:>3}  loss {:.4}  grad norm {norm:.4}",
                total / 4.0
            );
        }
    }
    for (x, y) in &data {
        let mut g = Graph::new(&params);
        let xv = g.input(Tensor::row_vector(x.to_vec()))?;
        let h = g.linear(xv, "l1")?;
        let h = g.tanh(h)?;
        let logits = g.linear(h, "l2")?;
        let p = nsnet::train::prob_of_entails(g.value(logits).data());
        println!("{x:?} -> p(1) = {p:.3} (want {y})");
    }
    Ok(())
}
