//! Human-readable per-sub-fact breakdown of a prediction.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::Label;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactBlock {
    /// `subject | predicate | object`.
    pub fact: String,
    pub n: f64,
    pub m: f64,
    pub l: f64,
    /// Display form of the KB tuple behind `l`, if any.
    pub best_tuple: Option<String>,
    /// Ensemble combination of `n`, `m`, `l`.
    pub combined: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub id: String,
    pub premise: String,
    pub hypothesis: String,
    pub gold: Option<Label>,
    pub facts: Vec<FactBlock>,
    pub ensemble_prob: f64,
    pub ensemble_label: Label,
    /// Present when a trained NSnet checkpoint was available.
    pub nsnet_prob: Option<f64>,
    pub nsnet_label: Option<Label>,
}

pub const NO_MATCH: &str = "(no KB match)";

impl Explanation {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "example     {}", self.id);
        let _ = writeln!(s, "premise     {}", self.premise);
        let _ = writeln!(s, "hypothesis  {}", self.hypothesis);
        if let Some(g) = self.gold {
            let _ = writeln!(s, "gold        {g}");
        }
        for (i, f) in self.facts.iter().enumerate() {
            let _ = writeln!(s, "\n[{}] {}", i + 1, f.fact);
            let _ = writeln!(s, "    n {:.4}  m {:.4}  l {:.4}", f.n, f.m, f.l);
            match &f.best_tuple {
                Some(t) => {
                    let _ = writeln!(s, "    kb ({t})");
                }
                None => {
                    let _ = writeln!(s, "    kb {NO_MATCH}");
                }
            }
            let _ = writeln!(s, "    or {:.4}", f.combined);
        }
        let _ = writeln!(
            s,
            "\nensemble    {:.4} {}",
            self.ensemble_prob, self.ensemble_label
        );
        match (self.nsnet_prob, self.nsnet_label) {
            (Some(p), Some(l)) => {
                let _ = writeln!(s, "nsnet       {p:.4} {l}");
            }
            _ => {
                let _ = writeln!(s, "nsnet       (no trained checkpoint)");
            }
        }
        s
    }
}
