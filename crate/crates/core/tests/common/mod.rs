//! Shared oracles and fixtures for the integration tests.
#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::HashSet;

use nsnet::aggregator::{init_nsnet, FactFeatures, ModelDims, NsnetExample};
use nsnet::autodiff::{Grads, Graph, ParamStore, Tensor, Var};
use nsnet::data::{EntailExample, Split};
use nsnet::decompose::SubFact;
use nsnet::embedding::EmbeddingTable;
use nsnet::kb::{FieldScorer, InvertedIndex, KbTuple};
use nsnet::pipeline::featurize;
use nsnet::synthetic::Corpus;
use nsnet::text::{is_stopword, Vocabulary};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Finite-difference step.
pub const FD_STEP: f64 = 1e-6;
/// Gradients smaller than this are compared absolutely.
pub const REL_FLOOR: f64 = 1e-5;

#[derive(Debug)]
pub struct GradCheck {
    pub checked: usize,
    pub max_rel: f64,
    pub worst: String,
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_FLOOR)
}

fn eval_loss<F>(store: &ParamStore, seed: Option<u64>, f: &F) -> f64
where
    F: Fn(&mut Graph<'_>) -> nsnet::Result<Var>,
{
    let mut g = match seed {
        Some(s) => Graph::training(store, s),
        None => Graph::new(store),
    };
    let loss = f(&mut g).expect("forward");
    g.value(loss).item()
}

/// Compares reverse-mode gradients of the scalar built by `f` against
/// central differences, entry by entry, over every trainable parameter.
/// A training graph with `seed` is used when given, so dropout masks repeat.
pub fn gradcheck<F>(store: &ParamStore, seed: Option<u64>, f: F) -> GradCheck
where
    F: Fn(&mut Graph<'_>) -> nsnet::Result<Var>,
{
    let mut grads = Grads::new(store);
    {
        let mut g = match seed {
            Some(s) => Graph::training(store, s),
            None => Graph::new(store),
        };
        let loss = f(&mut g).expect("forward");
        g.backward(loss, &mut grads, 1.0).expect("backward");
    }
    let mut probe = store.clone();
    let mut out = GradCheck {
        checked: 0,
        max_rel: 0.0,
        worst: String::new(),
    };
    for id in store.ids().collect::<Vec<_>>() {
        if !store.is_trainable(id) {
            continue;
        }
        let n = store.get(id).len();
        for i in 0..n {
            let x = store.get(id).data()[i];
            probe.get_mut(id).data_mut()[i] = x + FD_STEP;
            let up = eval_loss(&probe, seed, &f);
            probe.get_mut(id).data_mut()[i] = x - FD_STEP;
            let down = eval_loss(&probe, seed, &f);
            probe.get_mut(id).data_mut()[i] = x;
            let numeric = (up - down) / (2.0 * FD_STEP);
            let analytic = grads.get(id).map_or(0.0, |t| t.data()[i]);
            let e = rel_err(analytic, numeric);
            out.checked += 1;
            if e > out.max_rel {
                out.max_rel = e;
                out.worst = format!(
                    "{}[{i}] analytic {analytic:.6e} numeric {numeric:.6e}",
                    store.name(id)
                );
            }
        }
    }
    out
}

/// Uniform values in ±1 kept at least `margin` away from zero, so relu kinks
/// are not straddled by the finite-difference step.
pub fn random_tensor(rng: &mut ChaCha8Rng, rows: usize, cols: usize, margin: f64) -> Tensor {
    let data = (0..rows * cols)
        .map(|_| {
            let v: f64 = rng.gen_range(margin..1.0);
            if rng.gen_bool(0.5) {
                v
            } else {
                -v
            }
        })
        .collect();
    Tensor::new(rows, cols, data).unwrap()
}

/// Reduces any tensor to a scalar through a fixed random projection, so every
/// output entry carries a distinct weight in the loss.
pub fn project(g: &mut Graph<'_>, x: Var, seed: u64) -> nsnet::Result<Var> {
    let cols = g.shape(x).1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = g.input(random_tensor(&mut rng, cols, 1, 0.1))?;
    let y = g.matmul(x, r)?;
    g.sum_all(y)
}

/// Exhaustive retrieval: every tuple sharing a non-stopword token with the
/// fact is scored by Jaccard over distinct flat tokens, then sorted by
/// descending score and ascending id.
pub fn brute_force_top_k(tuples: &[KbTuple], fact: &SubFact, k: usize) -> Vec<(u32, f64)> {
    let query: HashSet<&str> = fact.flat.iter().map(|t| t.as_str()).collect();
    let content: HashSet<&str> = fact
        .flat
        .iter()
        .filter(|t| !is_stopword(t))
        .map(|t| t.as_str())
        .collect();
    let mut scored: Vec<(u32, f64)> = Vec::new();
    for t in tuples {
        let words: HashSet<&str> = t.flat().map(|w| w.as_str()).collect();
        if !words.iter().any(|w| content.contains(w)) {
            continue;
        }
        let inter = words.intersection(&query).count();
        let union = words.union(&query).count();
        scored.push((t.id, inter as f64 / union as f64));
    }
    scored.sort_by(|a, b| match b.1.partial_cmp(&a.1).unwrap() {
        Ordering::Equal => a.0.cmp(&b.0),
        o => o,
    });
    scored.truncate(k);
    scored
}

/// A small word pool mixing content words and stopwords, so ties and
/// stopword-only facts both occur.
pub const POOL: &[&str] = &[
    "cell", "wall", "plant", "animal", "energy", "sun", "water", "heat", "light", "root", "leaf",
    "oxygen", "iron", "rock", "the", "is", "a", "of", "in", "and",
];

fn phrase(rng: &mut ChaCha8Rng, min: usize, max: usize) -> String {
    let n = rng.gen_range(min..=max);
    (0..n)
        .map(|_| POOL[rng.gen_range(0..POOL.len())])
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn random_kb(rng: &mut ChaCha8Rng, n: usize) -> Vec<KbTuple> {
    (0..n)
        .map(|i| {
            KbTuple::parse(
                i as u32 * 3 + 1,
                &phrase(rng, 1, 3),
                &phrase(rng, 1, 2),
                &phrase(rng, 0, 3),
            )
            .unwrap()
        })
        .collect()
}

pub fn random_fact(rng: &mut ChaCha8Rng) -> SubFact {
    SubFact::parse(
        &phrase(rng, 1, 3),
        &phrase(rng, 1, 2),
        &phrase(rng, 0, 3),
        nsnet::decompose::FactSource::External,
    )
    .unwrap()
}

pub fn tiny_dims() -> ModelDims {
    ModelDims {
        embed_dim: 6,
        hidden: 5,
        hybrid: 4,
        compose: 3,
        max_facts: 3,
        top_k: 4,
    }
}

/// A freshly initialized NSnet over a vocabulary of `words`.
pub fn fresh_nsnet(words: &str, dims: ModelDims, seed: u64) -> (Vocabulary, ParamStore) {
    let tokens = nsnet::text::normalize_tokenize(words, 10_000);
    let vocab = Vocabulary::build(&tokens, 10_000);
    let table = EmbeddingTable::random(&vocab, dims.embed_dim, seed);
    let mut store = ParamStore::new(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    nsnet::entail::init_params(&mut store, &table, dims.entail(), &mut rng).unwrap();
    let store = init_nsnet(&store, dims, seed).unwrap();
    (vocab, store)
}

pub struct SyntheticSetup {
    pub examples: Vec<EntailExample>,
    pub features: Vec<NsnetExample>,
    pub vocab: Vocabulary,
    pub params: ParamStore,
}

/// Featurizes the first `n` synthetic training pairs against the synthetic KB
/// and initializes an NSnet for them.
pub fn synthetic_setup(n: usize, dims: ModelDims, seed: u64) -> SyntheticSetup {
    let corpus = Corpus::generate(nsnet::synthetic::Sizes::default(), seed);
    let examples: Vec<EntailExample> = corpus
        .split(Split::Train)
        .iter()
        .take(n)
        .enumerate()
        .map(|(i, p)| EntailExample::new(format!("train-{i}"), &p.premise, &p.hypothesis, p.label))
        .collect::<nsnet::Result<_>>()
        .unwrap();
    let tuples = corpus
        .kb
        .iter()
        .enumerate()
        .map(|(i, f)| KbTuple::parse(i as u32, f.subject, f.predicate, f.object))
        .collect::<nsnet::Result<Vec<_>>>()
        .unwrap();
    let index = InvertedIndex::build(tuples).unwrap();
    let words: Vec<String> = examples
        .iter()
        .map(|e| format!("{} {}", e.premise, e.hypothesis))
        .collect();
    let (vocab, params) = fresh_nsnet(&words.join(" "), dims, seed);
    let scorer = FieldScorer::word_over(true);
    let features = examples
        .iter()
        .map(|e| featurize(e, &vocab, &index, &scorer, dims.top_k, dims.max_facts))
        .collect();
    SyntheticSetup {
        examples,
        features,
        vocab,
        params,
    }
}

/// Hand-built features for gradient checks: two sub-facts with nonzero
/// symbolic scores.
pub fn handmade_example(vocab: &Vocabulary, label: usize, dims: ModelDims) -> NsnetExample {
    let fact = |s: &str, p: &str, o: &str, m: f64, l: f64| {
        let fact = SubFact::parse(s, p, o, nsnet::decompose::FactSource::External).unwrap();
        let mut emb = vec![0.0; dims.top_k];
        emb[0] = l;
        emb[1] = l / 2.0;
        FactFeatures {
            ids: vocab.ids(&fact.flat),
            fact,
            m_score: m,
            l_score: l,
            emb,
            best_tuple: None,
        }
    };
    let premise = nsnet::text::normalize_tokenize("plants need light and water to grow", 40);
    NsnetExample {
        facts: vec![
            fact("plants", "need", "light", 0.4, 0.9),
            fact("water", "helps", "growth", 0.2, 0.3),
        ],
        premise_ids: vocab.ids(&premise),
        label,
    }
}
