//! Decomposable-attention entailment network.
//!
//! Attend: `e_ij = F(a_i) · F(b_j)`, soft-align each side against the
//! other with row softmaxes. Compare: `G([a_i; beta_i])`, `G([b_j; alpha_j])`.
//! Aggregate: sum each side into `v1`, `v2`, then a linear layer over
//! `[v1; v2]` gives two logits (neutral, entails). `F` and `G` are
//! two-layer relu feed-forward nets with dropout. There is no
//! intra-sentence attention and no input projection: embeddings feed
//! `F` and `G` directly.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, ParamStore, Tensor, Var};
use crate::decompose::MAX_FACT_LEN;
use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result};
use crate::matcher::MAX_PREMISE_LEN;
use crate::train::{prob_of_entails, Objective};

pub const EMBEDDING: &str = "embedding";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntailDims {
    pub embed_dim: usize,
    pub hidden: usize,
}

impl Default for EntailDims {
    fn default() -> Self {
        EntailDims {
            embed_dim: 300,
            hidden: 200,
        }
    }
}

impl EntailDims {
    /// Length of `n_v = [v1; v2]`.
    pub fn nv_dim(&self) -> usize {
        2 * self.hidden
    }
}

/// Adds the embedding table and every entailment-network weight to `store`.
pub fn init_params(
    store: &mut ParamStore,
    table: &EmbeddingTable,
    dims: EntailDims,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    if table.dim() != dims.embed_dim {
        return Err(Error::Config(format!(
            "embedding table has dim {}, model expects {}",
            table.dim(),
            dims.embed_dim
        )));
    }
    store.add(EMBEDDING, table.rows.clone(), table.trainable)?;
    let (d, h) = (dims.embed_dim, dims.hidden);
    for (prefix, input) in [("attend", d), ("compare", 2 * d)] {
        store.add_xavier(format!("{prefix}.l1.w"), input, h, rng)?;
        store.add_zeros(format!("{prefix}.l1.b"), 1, h)?;
        store.add_xavier(format!("{prefix}.l2.w"), h, h, rng)?;
        store.add_zeros(format!("{prefix}.l2.b"), 1, h)?;
    }
    store.add_xavier("entail.out.w", 2 * h, 2, rng)?;
    store.add_zeros("entail.out.b", 1, 2)?;
    Ok(())
}

/// Graph handles produced by one forward pass.
#[derive(Clone, Copy, Debug)]
pub struct EntailVars {
    pub logits: Var,
    /// `1 x 1` probability of the entails class.
    pub n_prob: Var,
    /// `1 x 2h` aggregate representation `[v1; v2]`.
    pub n_v: Var,
    /// Soft alignment of each fact token over premise tokens (rows sum to 1).
    pub attn_fact: Var,
    /// Soft alignment of each premise token over fact tokens (rows sum to 1).
    pub attn_premise: Var,
}

fn ffn(g: &mut Graph<'_>, x: Var, prefix: &str, dropout: f64) -> Result<Var> {
    let h = g.linear(x, &format!("{prefix}.l1"))?;
    let h = g.relu(h)?;
    let h = g.dropout(h, dropout)?;
    let h = g.linear(h, &format!("{prefix}.l2"))?;
    let h = g.relu(h)?;
    g.dropout(h, dropout)
}

/// Runs the network on vocabulary ids. Both sequences must be non-empty;
/// they are truncated to 25 (fact) and 40 (premise) tokens.
pub fn entail_forward(
    g: &mut Graph<'_>,
    fact_ids: &[usize],
    premise_ids: &[usize],
    dropout: f64,
) -> Result<EntailVars> {
    if fact_ids.is_empty() || premise_ids.is_empty() {
        return Err(Error::Contract(
            "entailment input sequences must be non-empty".into(),
        ));
    }
    let fact_ids = &fact_ids[..fact_ids.len().min(MAX_FACT_LEN)];
    let premise_ids = &premise_ids[..premise_ids.len().min(MAX_PREMISE_LEN)];
    let table = g.param_named(EMBEDDING)?;
    let a = g.gather(table, fact_ids)?;
    let b = g.gather(table, premise_ids)?;

    let fa = ffn(g, a, "attend", dropout)?;
    let fb = ffn(g, b, "attend", dropout)?;
    let fb_t = g.transpose(fb)?;
    let e = g.matmul(fa, fb_t)?;
    let attn_fact = g.row_softmax(e)?;
    let e_t = g.transpose(e)?;
    let attn_premise = g.row_softmax(e_t)?;
    let beta = g.matmul(attn_fact, b)?;
    let alpha = g.matmul(attn_premise, a)?;

    let a_cmp = g.concat_cols(&[a, beta])?;
    let b_cmp = g.concat_cols(&[b, alpha])?;
    let v1 = ffn(g, a_cmp, "compare", dropout)?;
    let v2 = ffn(g, b_cmp, "compare", dropout)?;
    let v1 = g.sum_rows(v1)?;
    let v2 = g.sum_rows(v2)?;
    let n_v = g.concat_cols(&[v1, v2])?;
    let logits = g.linear(n_v, "entail.out")?;
    let probs = g.row_softmax(logits)?;
    let n_prob = g.slice_cols(probs, 1, 1)?;
    Ok(EntailVars {
        logits,
        n_prob,
        n_v,
        attn_fact,
        attn_premise,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EntailOutput {
    pub n_prob: f64,
    pub n_v: Vec<f64>,
}

/// Evaluation-mode forward pass.
pub fn entail(
    params: &ParamStore,
    fact_ids: &[usize],
    premise_ids: &[usize],
) -> Result<EntailOutput> {
    let mut g = Graph::new(params);
    let vars = entail_forward(&mut g, fact_ids, premise_ids, 0.0)?;
    Ok(EntailOutput {
        n_prob: g.value(vars.n_prob).item(),
        n_v: g.value(vars.n_v).data().to_vec(),
    })
}

/// A (text, premise) pair encoded as vocabulary ids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodedPair {
    pub fact_ids: Vec<usize>,
    pub premise_ids: Vec<usize>,
    pub label: usize,
}

/// Cross-entropy objective for training the network on its own.
#[derive(Clone, Copy, Debug)]
pub struct EntailObjective {
    pub dropout: f64,
}

impl Objective for EntailObjective {
    type Example = EncodedPair;

    fn logits(&self, g: &mut Graph<'_>, ex: &EncodedPair) -> Result<Var> {
        Ok(entail_forward(g, &ex.fact_ids, &ex.premise_ids, self.dropout)?.logits)
    }

    fn label(&self, ex: &EncodedPair) -> usize {
        ex.label
    }
}

/// Probability of entailment from raw logits, for callers holding a tensor.
pub fn entails_probability(logits: &Tensor) -> f64 {
    prob_of_entails(logits.data())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::Vocabulary;
    use rand::SeedableRng;

    fn small_model(seed: u64) -> ParamStore {
        let vocab = Vocabulary::build(&crate::text::normalize_tokenize("a b c d e f g h", 20), 20);
        let table = EmbeddingTable::random(&vocab, 6, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = ParamStore::new(seed);
        init_params(
            &mut s,
            &table,
            EntailDims {
                embed_dim: 6,
                hidden: 5,
            },
            &mut rng,
        )
        .unwrap();
        s
    }

    #[test]
    fn output_contract() {
        let p = small_model(1);
        let out = entail(&p, &[2, 3, 4], &[5, 6, 7, 8]).unwrap();
        assert!(out.n_prob > 0.0 && out.n_prob < 1.0);
        assert_eq!(out.n_v.len(), 10);
        assert_eq!(entail(&p, &[2, 3, 4], &[5, 6, 7, 8]).unwrap(), out);
    }

    #[test]
    fn default_dims() {
        assert_eq!(EntailDims::default().nv_dim(), 400);
    }

    #[test]
    fn attention_rows_are_distributions() {
        let p = small_model(2);
        let mut g = Graph::new(&p);
        let v = entail_forward(&mut g, &[2, 3], &[4, 5, 6], 0.0).unwrap();
        for attn in [v.attn_fact, v.attn_premise] {
            let t = g.value(attn);
            for r in 0..t.rows() {
                assert!((t.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-6);
            }
        }
        assert_eq!(g.value(v.attn_fact).shape(), (2, 3));
        assert_eq!(g.value(v.attn_premise).shape(), (3, 2));
    }

    #[test]
    fn direction_matters() {
        let p = small_model(3);
        let fwd = entail(&p, &[2, 3], &[4, 5, 6]).unwrap();
        let back = entail(&p, &[4, 5, 6], &[2, 3]).unwrap();
        assert_ne!(fwd.n_prob, back.n_prob);
    }

    #[test]
    fn empty_input_is_a_contract_violation() {
        let p = small_model(4);
        assert!(matches!(entail(&p, &[], &[2]), Err(Error::Contract(_))));
        assert!(matches!(entail(&p, &[2], &[]), Err(Error::Contract(_))));
    }

    #[test]
    fn mismatched_embedding_dim_is_rejected() {
        let vocab = Vocabulary::default();
        let table = EmbeddingTable::random(&vocab, 4, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut s = ParamStore::new(0);
        assert!(init_params(&mut s, &table, EntailDims::default(), &mut rng).is_err());
    }
}
