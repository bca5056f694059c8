//! Tokenization, vocabulary and set-overlap primitives.
//!
//! Everything here is a pure function. Scores are word-level: text is
//! lowercased, split on whitespace and punctuation, and punctuation is
//! dropped. No stemming and no stopword removal is applied for scoring;
//! [`is_stopword`] exists only for retrieval candidate generation.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A normalized word: lowercase, non-empty, no whitespace or punctuation.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Token(String);

impl Token {
    /// Normalizes `raw` into a single token, or `None` if nothing survives.
    ///
    /// Input that would split into several tokens keeps only the first.
    pub fn new(raw: &str) -> Option<Token> {
        normalize_tokenize(raw, 1).into_iter().next()
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for Token {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// Lowercases, splits on whitespace and punctuation boundaries, discards
/// punctuation, and truncates to `max_len` tokens.
///
/// Characters that are alphanumeric are word characters; every other
/// character is a boundary. `"cell's"` therefore yields `["cell", "s"]`.
pub fn normalize_tokenize(text: &str, max_len: usize) -> Vec<Token> {
    debug_assert!(max_len >= 1, "max_len must be at least 1");
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            cur.extend(ch.to_lowercase());
        } else if !cur.is_empty() {
            out.push(Token(std::mem::take(&mut cur)));
            if out.len() == max_len {
                return out;
            }
        }
    }
    if !cur.is_empty() && out.len() < max_len {
        out.push(Token(cur));
    }
    out
}

/// Joins tokens with single spaces.
pub fn join(tokens: &[Token]) -> String {
    let mut s = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        s.push_str(t.as_str());
    }
    s
}

/// Unordered, deduplicated set of tokens.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSet(BTreeSet<Token>);

impl TokenSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, t: &Token) -> bool {
        self.0.contains(t)
    }

    pub fn insert(&mut self, t: Token) -> bool {
        self.0.insert(t)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Token> {
        self.0.iter()
    }

    pub fn intersection_len(&self, other: &TokenSet) -> usize {
        let (small, large) = if self.len() <= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        small.0.iter().filter(|t| large.0.contains(*t)).count()
    }
}

impl<'a> FromIterator<&'a Token> for TokenSet {
    fn from_iter<I: IntoIterator<Item = &'a Token>>(iter: I) -> Self {
        TokenSet(iter.into_iter().cloned().collect())
    }
}

impl FromIterator<Token> for TokenSet {
    fn from_iter<I: IntoIterator<Item = Token>>(iter: I) -> Self {
        TokenSet(iter.into_iter().collect())
    }
}

/// `|a ∩ b| / |a ∪ b|`, with `jaccard(∅, ∅) = 0`.
pub fn jaccard(a: &TokenSet, b: &TokenSet) -> f64 {
    let inter = a.intersection_len(b);
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// `|h ∩ p| / |p|`, with an empty `p` scoring 0.
pub fn asym_overlap(h: &TokenSet, p: &TokenSet) -> f64 {
    if p.is_empty() {
        0.0
    } else {
        h.intersection_len(p) as f64 / p.len() as f64
    }
}

const STOPWORDS: [&str; 50] = [
    "a", "an", "the", "is", "are", "was", "were", "be", "been", "being", "am", "of", "in", "on",
    "at", "to", "for", "from", "by", "with", "as", "into", "about", "and", "or", "but", "not",
    "no", "nor", "so", "if", "then", "than", "that", "which", "who", "whom", "this", "these",
    "those", "it", "its", "they", "them", "their", "there", "has", "have", "had", "do",
];

/// Closed-class English words excluded from retrieval candidate generation.
pub fn is_stopword(token: &Token) -> bool {
    STOPWORDS.contains(&token.as_str())
}

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
const PAD: &str = "<pad>";
const UNK: &str = "<unk>";

/// Bijective word ↔ index map. Index 0 is padding, index 1 is the unknown token.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    ids: HashMap<String, usize>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        let words = vec![PAD.to_string(), UNK.to_string()];
        let ids = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        Vocabulary { words, ids }
    }
}

impl Vocabulary {
    /// Builds a vocabulary of at most `cap` entries (including the two
    /// reserved ones), keeping the most frequent tokens. Frequency ties
    /// break lexicographically so the result is independent of input order.
    pub fn build<'a, I>(tokens: I, cap: usize) -> Self
    where
        I: IntoIterator<Item = &'a Token>,
    {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for t in tokens {
            *counts.entry(t.as_str()).or_default() += 1;
        }
        let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let mut vocab = Vocabulary::default();
        for (w, _) in ranked.into_iter().take(cap.saturating_sub(2)) {
            vocab.push(w);
        }
        vocab
    }

    fn push(&mut self, word: &str) {
        if !self.ids.contains_key(word) {
            self.ids.insert(word.to_string(), self.words.len());
            self.words.push(word.to_string());
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of `token`, or [`UNK_ID`] when absent.
    pub fn id(&self, token: &Token) -> usize {
        self.ids.get(token.as_str()).copied().unwrap_or(UNK_ID)
    }

    pub fn get(&self, word: &str) -> Option<usize> {
        self.ids.get(word).copied()
    }

    pub fn word(&self, id: usize) -> Option<&str> {
        self.words.get(id).map(String::as_str)
    }

    pub fn ids(&self, tokens: &[Token]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t)).collect()
    }

    /// Writes one word per line, in index order.
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        for word in &self.words {
            writeln!(w, "{word}")?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut words = Vec::new();
        for line in r.lines() {
            words.push(line?);
        }
        if words.len() < 2 || words[0] != PAD || words[1] != UNK {
            return Err(Error::Format(
                "vocabulary file must start with <pad> and <unk>".into(),
            ));
        }
        let mut ids = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if ids.insert(w.clone(), i).is_some() {
                return Err(Error::Format(format!(
                    "duplicate vocabulary word {w:?} at line {}",
                    i + 1
                )));
            }
        }
        Ok(Vocabulary { words, ids })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(words: &[&str]) -> TokenSet {
        words.iter().map(|w| Token::new(w).unwrap()).collect()
    }

    fn strs(tokens: &[Token]) -> Vec<&str> {
        tokens.iter().map(Token::as_str).collect()
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(
            strs(&normalize_tokenize("The aorta is large.", 25)),
            ["the", "aorta", "is", "large"]
        );
        assert!(normalize_tokenize("", 25).is_empty());
        assert_eq!(strs(&normalize_tokenize("a b c d", 2)), ["a", "b"]);
        assert_eq!(
            strs(&normalize_tokenize(
                "plant cells possess a cell wall , animals never .",
                40
            ))
            .len(),
            8
        );
    }

    #[test]
    fn jaccard_examples() {
        assert_eq!(jaccard(&set(&["hydrogen"]), &set(&["hydrogen"])), 1.0);
        assert_eq!(jaccard(&set(&["a", "b"]), &set(&["b", "c"])), 1.0 / 3.0);
        assert_eq!(jaccard(&TokenSet::new(), &TokenSet::new()), 0.0);
    }

    #[test]
    fn asym_overlap_examples() {
        let p = set(&[
            "blood", "heart", "the", "aorta", "is", "a", "large", "vessel", "that", "moves",
        ]);
        assert_eq!(p.len(), 10);
        assert_eq!(asym_overlap(&set(&["blood", "heart"]), &p), 0.2);
        assert_eq!(asym_overlap(&p, &p), 1.0);
        assert_eq!(asym_overlap(&set(&["x"]), &set(&["y"])), 0.0);
        assert_eq!(asym_overlap(&set(&["x"]), &TokenSet::new()), 0.0);
    }

    #[test]
    fn asym_overlap_is_asymmetric() {
        let h = set(&["a"]);
        let p = set(&["a", "b"]);
        assert_ne!(asym_overlap(&h, &p), asym_overlap(&p, &h));
    }

    #[test]
    fn vocabulary_reserves_pad_and_unk() {
        let toks = normalize_tokenize("b a a c", 10);
        let v = Vocabulary::build(&toks, 4);
        assert_eq!(v.len(), 4);
        assert_eq!(v.word(0), Some("<pad>"));
        assert_eq!(v.word(1), Some("<unk>"));
        assert_eq!(v.get("a"), Some(2));
        assert_eq!(v.get("b"), Some(3));
        assert_eq!(v.id(&Token::new("c").unwrap()), UNK_ID);

        let mut buf = Vec::new();
        v.write(&mut buf).unwrap();
        assert_eq!(Vocabulary::read(&buf[..]).unwrap(), v);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn word_set() -> impl Strategy<Value = TokenSet> {
            proptest::collection::vec("[a-f]{1,2}", 0..8)
                .prop_map(|ws| ws.iter().filter_map(|w| Token::new(w)).collect())
        }

        proptest! {
            #[test]
            fn jaccard_symmetric_and_bounded(a in word_set(), b in word_set()) {
                let s = jaccard(&a, &b);
                prop_assert_eq!(s, jaccard(&b, &a));
                prop_assert!((0.0..=1.0).contains(&s));
                if !a.is_empty() {
                    prop_assert_eq!(jaccard(&a, &a), 1.0);
                }
                if a.len() + b.len() > 0 {
                    prop_assert_eq!(s == 0.0, a.intersection_len(&b) == 0);
                }
            }

            #[test]
            fn overlap_bounded(h in word_set(), p in word_set()) {
                let s = asym_overlap(&h, &p);
                prop_assert!((0.0..=1.0).contains(&s));
            }

            #[test]
            fn tokenize_idempotent(text in "[A-Za-z .,;!?'-]{0,60}") {
                let once = normalize_tokenize(&text, 25);
                let twice = normalize_tokenize(&join(&once), 25);
                prop_assert_eq!(once.clone(), twice);
                for t in &once {
                    prop_assert!(!t.as_str().is_empty());
                    prop_assert!(t.as_str().chars().all(char::is_alphanumeric));
                }
            }
        }
    }
}
