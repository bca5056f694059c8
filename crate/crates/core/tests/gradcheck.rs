mod common;

use common::{gradcheck, handmade_example, project, random_tensor, tiny_dims, GradCheck};
use nsnet::aggregator::{nsnet_forward, Ablation};
use nsnet::autodiff::{Graph, ParamStore, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-3;

fn store(shapes: &[(&str, usize, usize)], seed: u64) -> ParamStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = ParamStore::new(seed);
    for &(name, r, c) in shapes {
        s.add(name, random_tensor(&mut rng, r, c, 0.05), true)
            .unwrap();
    }
    s
}

fn check(name: &str, report: GradCheck) {
    println!(
        "{name}: {} entries, max rel err {:.2e} ({})",
        report.checked, report.max_rel, report.worst
    );
    assert!(report.checked > 0, "{name}: nothing checked");
    assert!(report.max_rel <= TOL, "{name}: {report:?}");
}

fn p(g: &mut Graph<'_>, name: &str) -> Var {
    g.param_named(name).unwrap()
}

#[test]
fn matmul() {
    let s = store(&[("a", 3, 4), ("b", 4, 2)], 1);
    check(
        "matmul",
        gradcheck(&s, None, |g| {
            let (a, b) = (p(g, "a"), p(g, "b"));
            let y = g.matmul(a, b)?;
            project(g, y, 10)
        }),
    );
}

#[test]
fn add_same_shape_and_broadcast() {
    let s = store(&[("a", 3, 4), ("b", 3, 4), ("row", 1, 4)], 2);
    check(
        "add",
        gradcheck(&s, None, |g| {
            let (a, b, r) = (p(g, "a"), p(g, "b"), p(g, "row"));
            let y = g.add(a, b)?;
            let y = g.add(y, r)?;
            project(g, y, 11)
        }),
    );
}

#[test]
fn scale_and_transpose() {
    let s = store(&[("a", 3, 5)], 3);
    check(
        "scale+transpose",
        gradcheck(&s, None, |g| {
            let a = p(g, "a");
            let y = g.scale(a, -1.7)?;
            let y = g.transpose(y)?;
            project(g, y, 12)
        }),
    );
}

#[test]
fn concat_and_slice() {
    let s = store(&[("a", 2, 3), ("b", 2, 4)], 4);
    check(
        "concat+slice",
        gradcheck(&s, None, |g| {
            let (a, b) = (p(g, "a"), p(g, "b"));
            let y = g.concat_cols(&[a, b, a])?;
            let y = g.slice_cols(y, 2, 6)?;
            project(g, y, 13)
        }),
    );
}

#[test]
fn elementwise_nonlinearities() {
    let s = store(&[("a", 3, 4)], 5);
    for (name, op) in [("relu", 0), ("tanh", 1), ("sigmoid", 2)] {
        check(
            name,
            gradcheck(&s, None, |g| {
                let a = p(g, "a");
                let y = match op {
                    0 => g.relu(a)?,
                    1 => g.tanh(a)?,
                    _ => g.sigmoid(a)?,
                };
                project(g, y, 14)
            }),
        );
    }
}

#[test]
fn row_softmax() {
    let s = store(&[("a", 3, 5)], 6);
    check(
        "row_softmax",
        gradcheck(&s, None, |g| {
            let a = p(g, "a");
            let y = g.row_softmax(a)?;
            project(g, y, 15)
        }),
    );
}

#[test]
fn reductions() {
    let s = store(&[("a", 4, 3)], 7);
    check(
        "mean_rows",
        gradcheck(&s, None, |g| {
            let a = p(g, "a");
            let y = g.mean_rows(a)?;
            project(g, y, 16)
        }),
    );
    check(
        "sum_rows",
        gradcheck(&s, None, |g| {
            let a = p(g, "a");
            let y = g.sum_rows(a)?;
            project(g, y, 17)
        }),
    );
    check(
        "sum_all",
        gradcheck(&s, None, |g| {
            let a = p(g, "a");
            let y = g.tanh(a)?;
            g.sum_all(y)
        }),
    );
}

#[test]
fn dropout_with_fixed_mask() {
    let s = store(&[("a", 3, 6)], 8);
    check(
        "dropout",
        gradcheck(&s, Some(99), |g| {
            let a = p(g, "a");
            let y = g.dropout(a, 0.3)?;
            project(g, y, 18)
        }),
    );
}

#[test]
fn cross_entropy_both_labels() {
    let s = store(&[("logits", 1, 2)], 9);
    for label in [0, 1] {
        check(
            "cross_entropy",
            gradcheck(&s, None, |g| {
                let x = p(g, "logits");
                g.cross_entropy(x, label)
            }),
        );
    }
}

#[test]
fn gather_with_repeats() {
    let s = store(&[("table", 5, 3)], 10);
    check(
        "gather",
        gradcheck(&s, None, |g| {
            let t = p(g, "table");
            let y = g.gather(t, &[4, 1, 4, 0])?;
            project(g, y, 19)
        }),
    );
}

#[test]
fn linear_layer() {
    let s = store(&[("x", 2, 3), ("lin.w", 3, 4), ("lin.b", 1, 4)], 11);
    check(
        "linear",
        gradcheck(&s, None, |g| {
            let x = p(g, "x");
            let y = g.linear(x, "lin")?;
            let y = g.tanh(y)?;
            project(g, y, 20)
        }),
    );
}

#[test]
fn attention_composite() {
    let s = store(&[("a", 3, 4), ("b", 5, 4)], 12);
    check(
        "attention",
        gradcheck(&s, None, |g| {
            let (a, b) = (p(g, "a"), p(g, "b"));
            let bt = g.transpose(b)?;
            let e = g.matmul(a, bt)?;
            let w = g.row_softmax(e)?;
            let beta = g.matmul(w, b)?;
            let v = g.concat_cols(&[a, beta])?;
            let v = g.sum_rows(v)?;
            let v = g.slice_cols(v, 0, 2)?;
            g.cross_entropy(v, 1)
        }),
    );
}

fn nsnet_batch_check(dropout: f64, seed: Option<u64>) -> GradCheck {
    let dims = tiny_dims();
    let (vocab, mut params) =
        common::fresh_nsnet("plants need light water helps growth and to grow", dims, 21);
    // zero-initialized biases would put relu pre-activations exactly on the
    // kink wherever dropout clears a whole row
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for id in params.ids().collect::<Vec<_>>() {
        for x in params.get_mut(id).data_mut() {
            *x += rng.gen_range(-0.1..0.1);
        }
    }
    let batch = [
        handmade_example(&vocab, 1, dims),
        handmade_example(&vocab, 0, dims),
    ];
    gradcheck(&params, seed, |g| {
        let mut total = None;
        for ex in &batch {
            let v = nsnet_forward(g, ex, dims, Ablation::NONE, dropout)?;
            let loss = g.cross_entropy(v.logits, ex.label)?;
            total = Some(match total {
                None => loss,
                Some(t) => g.add(t, loss)?,
            });
        }
        g.scale(total.unwrap(), 0.5)
    })
}

#[test]
fn full_nsnet_loss_on_two_examples() {
    check("nsnet batch", nsnet_batch_check(0.0, None));
}

#[test]
fn full_nsnet_loss_with_dropout() {
    check("nsnet batch dropout", nsnet_batch_check(0.1, Some(5)));
}
