//! Premise-side symbolic match score.

use crate::decompose::SubFact;
use crate::text::{asym_overlap, Token, TokenSet};

/// Premises are truncated to this many tokens.
pub const MAX_PREMISE_LEN: usize = 40;

/// `|h ∩ p| / |p|` over distinct tokens, with the premise cut to
/// [`MAX_PREMISE_LEN`] tokens.
pub fn symbolic_match(fact: &SubFact, premise: &[Token]) -> f64 {
    let h: TokenSet = fact.flat.iter().collect();
    let p: TokenSet = premise.iter().take(MAX_PREMISE_LEN).collect();
    asym_overlap(&h, &p)
}
