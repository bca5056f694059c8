//! The NSnet head: a hybrid layer applied to every sub-fact, then a
//! compositional layer over the concatenated hybrid outputs.
//!
//! For sub-fact `i` the hybrid input is
//! `[h_enc; l; m; n_prob; emb; n_v]`, where `h_enc` is the mean embedding of
//! the sub-fact, `l` and `m` are the lookup and matcher scores, `emb` holds
//! the per-tuple lookup similarities and `n_prob`, `n_v` come from the
//! entailment network. The hybrid weights are shared across sub-fact
//! positions; the compositional weights are not. Missing sub-fact slots are
//! zero-padded.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, ParamStore, Tensor, Var};
use crate::decompose::{SubFact, MAX_SUB_FACTS};
use crate::entail::{entail_forward, EntailDims, EMBEDDING};
use crate::error::{Error, Result};
use crate::kb::DEFAULT_TOP_K;
use crate::train::{prob_of_entails, Objective};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelDims {
    pub embed_dim: usize,
    pub hidden: usize,
    pub hybrid: usize,
    pub compose: usize,
    pub max_facts: usize,
    /// Retrieval depth, which is also the length of `emb`.
    pub top_k: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        ModelDims {
            embed_dim: 300,
            hidden: 200,
            hybrid: 50,
            compose: 50,
            max_facts: MAX_SUB_FACTS,
            top_k: DEFAULT_TOP_K,
        }
    }
}

impl ModelDims {
    pub fn entail(&self) -> EntailDims {
        EntailDims {
            embed_dim: self.embed_dim,
            hidden: self.hidden,
        }
    }

    /// Length of the hybrid-layer input.
    pub fn hybrid_input(&self) -> usize {
        self.embed_dim + 3 + self.top_k + 2 * self.hidden
    }
}

/// Which symbolic signals are zeroed. The architecture is unchanged.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Ablation {
    pub disable_matcher: bool,
    pub disable_lookup: bool,
}

impl Ablation {
    pub const NONE: Ablation = Ablation {
        disable_matcher: false,
        disable_lookup: false,
    };
    pub const BOTH: Ablation = Ablation {
        disable_matcher: true,
        disable_lookup: true,
    };
}

/// Precomputed, non-differentiable features of one sub-fact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactFeatures {
    pub fact: SubFact,
    /// Vocabulary ids of `fact.flat`.
    pub ids: Vec<usize>,
    pub m_score: f64,
    pub l_score: f64,
    pub emb: Vec<f64>,
    /// KB tuple behind `l_score`.
    pub best_tuple: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NsnetExample {
    pub facts: Vec<FactFeatures>,
    pub premise_ids: Vec<usize>,
    pub label: usize,
}

/// Everything that entered the hybrid layer for one sub-fact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreBundle {
    pub h_enc: Vec<f64>,
    pub l_score: f64,
    pub m_score: f64,
    pub n_prob: f64,
    pub emb: Vec<f64>,
    pub n_v: Vec<f64>,
}

impl ScoreBundle {
    pub fn concat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.h_enc.len() + 3 + self.emb.len() + self.n_v.len());
        v.extend_from_slice(&self.h_enc);
        v.extend([self.l_score, self.m_score, self.n_prob]);
        v.extend_from_slice(&self.emb);
        v.extend_from_slice(&self.n_v);
        v
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactOutput {
    pub fact: SubFact,
    pub bundle: ScoreBundle,
    pub hybrid: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NsnetOutput {
    pub logits: [f64; 2],
    pub prob_entail: f64,
    pub per_fact: Vec<FactOutput>,
}

/// Adds the hybrid and compositional weights to `store`.
pub fn init_params(store: &mut ParamStore, dims: ModelDims, rng: &mut ChaCha8Rng) -> Result<()> {
    store.add_xavier("hybrid.w", dims.hybrid_input(), dims.hybrid, rng)?;
    store.add_zeros("hybrid.b", 1, dims.hybrid)?;
    store.add_xavier(
        "compose.l1.w",
        dims.max_facts * dims.hybrid,
        dims.compose,
        rng,
    )?;
    store.add_zeros("compose.l1.b", 1, dims.compose)?;
    store.add_xavier("compose.l2.w", dims.compose, 2, rng)?;
    store.add_zeros("compose.l2.b", 1, 2)?;
    Ok(())
}

/// A full NSnet parameter set: a copy of the pretrained entailment network
/// plus freshly initialized aggregator weights.
pub fn init_nsnet(pretrained: &ParamStore, dims: ModelDims, seed: u64) -> Result<ParamStore> {
    let mut store = ParamStore::new(seed);
    store.absorb(pretrained, "")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    init_params(&mut store, dims, &mut rng)?;
    Ok(store)
}

/// `relu(W · in + b)` for one sub-fact; `input` must be `1 x hybrid_input`.
pub fn hybrid_forward(g: &mut Graph<'_>, input: Var) -> Result<Var> {
    let w_rows = g.params().by_name("hybrid.w").map(Tensor::rows);
    let (_, cols) = g.shape(input);
    if let Some(rows) = w_rows {
        if rows != cols {
            return Err(Error::Contract(format!(
                "hybrid input has length {cols}, layer expects {rows}"
            )));
        }
    }
    let h = g.linear(input, "hybrid")?;
    g.relu(h)
}

/// Pads `outs` with zero blocks to `max_facts` and returns `1 x 2` logits.
pub fn compositional_forward(g: &mut Graph<'_>, outs: &[Var], max_facts: usize) -> Result<Var> {
    if outs.is_empty() || outs.len() > max_facts {
        return Err(Error::Contract(format!(
            "compositional layer takes 1..={max_facts} sub-facts, got {}",
            outs.len()
        )));
    }
    let (_, width) = g.shape(outs[0]);
    let mut parts = outs.to_vec();
    for _ in outs.len()..max_facts {
        parts.push(g.input(Tensor::zeros(1, width))?);
    }
    let x = g.concat_cols(&parts)?;
    let h = g.linear(x, "compose.l1")?;
    let h = g.relu(h)?;
    g.linear(h, "compose.l2")
}

/// Graph handles for one sub-fact.
#[derive(Clone, Copy, Debug)]
pub struct FactVars {
    pub h_enc: Var,
    pub n_prob: Var,
    pub n_v: Var,
    pub input: Var,
    pub hybrid: Var,
}

pub struct NsnetVars {
    pub logits: Var,
    pub facts: Vec<FactVars>,
}

/// Builds the whole NSnet graph for one example.
pub fn nsnet_forward(
    g: &mut Graph<'_>,
    ex: &NsnetExample,
    dims: ModelDims,
    ablation: Ablation,
    dropout: f64,
) -> Result<NsnetVars> {
    if ex.facts.is_empty() {
        return Err(Error::Contract("example has no sub-facts".into()));
    }
    let facts = &ex.facts[..ex.facts.len().min(dims.max_facts)];
    let table = g.param_named(EMBEDDING)?;
    let mut vars = Vec::with_capacity(facts.len());
    let mut outs = Vec::with_capacity(facts.len());
    for f in facts {
        if f.emb.len() != dims.top_k {
            return Err(Error::Contract(format!(
                "emb has length {}, model expects {}",
                f.emb.len(),
                dims.top_k
            )));
        }
        let rows = g.gather(table, &f.ids)?;
        let h_enc = g.mean_rows(rows)?;
        let e = entail_forward(g, &f.ids, &ex.premise_ids, dropout)?;
        let l = if ablation.disable_lookup {
            0.0
        } else {
            f.l_score
        };
        let m = if ablation.disable_matcher {
            0.0
        } else {
            f.m_score
        };
        let emb = if ablation.disable_lookup {
            vec![0.0; f.emb.len()]
        } else {
            f.emb.clone()
        };
        let lm = g.input(Tensor::row_vector(vec![l, m]))?;
        let emb = g.input(Tensor::row_vector(emb))?;
        let input = g.concat_cols(&[h_enc, lm, e.n_prob, emb, e.n_v])?;
        let hybrid = hybrid_forward(g, input)?;
        outs.push(hybrid);
        vars.push(FactVars {
            h_enc,
            n_prob: e.n_prob,
            n_v: e.n_v,
            input,
            hybrid,
        });
    }
    let logits = compositional_forward(g, &outs, dims.max_facts)?;
    Ok(NsnetVars {
        logits,
        facts: vars,
    })
}

/// Evaluation-mode prediction with the per-sub-fact breakdown.
pub fn nsnet_predict(
    params: &ParamStore,
    ex: &NsnetExample,
    dims: ModelDims,
    ablation: Ablation,
) -> Result<NsnetOutput> {
    let mut g = Graph::new(params);
    let vars = nsnet_forward(&mut g, ex, dims, ablation, 0.0)?;
    let logits = g.value(vars.logits).data();
    let logits = [logits[0], logits[1]];
    let per_fact = vars
        .facts
        .iter()
        .zip(&ex.facts)
        .map(|(v, f)| {
            let input = g.value(v.input).data();
            let d = dims.embed_dim;
            FactOutput {
                fact: f.fact.clone(),
                bundle: ScoreBundle {
                    h_enc: g.value(v.h_enc).data().to_vec(),
                    l_score: input[d],
                    m_score: input[d + 1],
                    n_prob: g.value(v.n_prob).item(),
                    emb: input[d + 3..d + 3 + dims.top_k].to_vec(),
                    n_v: g.value(v.n_v).data().to_vec(),
                },
                hybrid: g.value(v.hybrid).data().to_vec(),
            }
        })
        .collect();
    Ok(NsnetOutput {
        logits,
        prob_entail: prob_of_entails(&logits),
        per_fact,
    })
}

/// Joint cross-entropy objective: gradients reach the aggregator, the
/// entailment network and the embedding table.
#[derive(Clone, Copy, Debug)]
pub struct NsnetObjective {
    pub dims: ModelDims,
    pub ablation: Ablation,
    pub dropout: f64,
}

impl Objective for NsnetObjective {
    type Example = NsnetExample;

    fn logits(&self, g: &mut Graph<'_>, ex: &NsnetExample) -> Result<Var> {
        Ok(nsnet_forward(g, ex, self.dims, self.ablation, self.dropout)?.logits)
    }

    fn label(&self, ex: &NsnetExample) -> usize {
        ex.label
    }
}
