//! Knowledge-base storage, inverted-index retrieval and the symbolic lookup score.
//!
//! Retrieval ranks candidate tuples by flat Jaccard overlap with a
//! sub-fact; candidates are tuples that share at least one non-stopword
//! token with it. Lookup then rescores each retrieved tuple with
//! [`FieldScorer::sim_f`] and takes the maximum.
//!
//! # KB file
//!
//! UTF-8 TSV, `subject \t predicate \t object`, one fact per line. The
//! Aristo TupleKB distribution has a header and extra columns; cut it down
//! first:
//!
//! ```text
//! tail -n +2 tuplekb.tsv | cut -f1-3 > kb.tsv
//! ```
//!
//! # Snapshot file
//!
//! JSON object `{"format_version": 1, "tuples": [...]}`; postings are
//! rebuilt on load.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::decompose::{SubFact, MAX_FACT_LEN};
use crate::embedding::{cosine, WordVectors};
use crate::error::{Error, Result};
use crate::text::{is_stopword, jaccard, join, normalize_tokenize, Token, TokenSet};

pub const DEFAULT_TOP_K: usize = 100;
pub const SNAPSHOT_VERSION: u32 = 1;
/// Cosine above which two words count as matching for [`Matcher::EmbOver`].
pub const EMB_OVER_THRESHOLD: f64 = 0.9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KbTuple {
    pub id: u32,
    pub subject: Vec<Token>,
    pub predicate: Vec<Token>,
    pub object: Vec<Token>,
    #[serde(skip)]
    all_tokens: TokenSet,
}

impl KbTuple {
    pub fn new(
        id: u32,
        subject: Vec<Token>,
        predicate: Vec<Token>,
        object: Vec<Token>,
    ) -> Result<Self> {
        if subject.is_empty() || predicate.is_empty() {
            return Err(Error::Contract(format!(
                "tuple {id}: subject and predicate must be non-empty"
            )));
        }
        let mut t = KbTuple {
            id,
            subject,
            predicate,
            object,
            all_tokens: TokenSet::new(),
        };
        t.subject.truncate(MAX_FACT_LEN);
        t.predicate.truncate(MAX_FACT_LEN);
        t.object.truncate(MAX_FACT_LEN);
        t.refresh();
        Ok(t)
    }

    pub fn parse(id: u32, subject: &str, predicate: &str, object: &str) -> Result<Self> {
        KbTuple::new(
            id,
            normalize_tokenize(subject, MAX_FACT_LEN),
            normalize_tokenize(predicate, MAX_FACT_LEN),
            normalize_tokenize(object, MAX_FACT_LEN),
        )
    }

    fn refresh(&mut self) {
        self.all_tokens = self.flat().cloned().collect();
    }

    pub fn all_tokens(&self) -> &TokenSet {
        &self.all_tokens
    }

    pub fn fields(&self) -> [&[Token]; 3] {
        [&self.subject, &self.predicate, &self.object]
    }

    pub fn flat(&self) -> impl Iterator<Item = &Token> {
        self.subject
            .iter()
            .chain(&self.predicate)
            .chain(&self.object)
    }

    /// `subject; predicate; object`.
    pub fn display(&self) -> String {
        format!(
            "{}; {}; {}",
            join(&self.subject),
            join(&self.predicate),
            join(&self.object)
        )
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct KbLoadReport {
    pub loaded: usize,
    /// Rows whose subject or predicate tokenized to nothing.
    pub skipped: usize,
}

/// Reads a 3-column KB file. Tuple ids are assigned in line order.
pub fn read_kb<R: BufRead>(reader: R, origin: &Path) -> Result<(Vec<KbTuple>, KbLoadReport)> {
    let mut tuples = Vec::new();
    let mut report = KbLoadReport::default();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(Error::ingest(
                origin,
                n + 1,
                format!("expected 3 tab-separated fields, found {}", cols.len()),
            ));
        }
        match KbTuple::parse(tuples.len() as u32, cols[0], cols[1], cols[2]) {
            Ok(t) => tuples.push(t),
            Err(_) => report.skipped += 1,
        }
    }
    report.loaded = tuples.len();
    Ok((tuples, report))
}

pub fn load_kb(path: &Path) -> Result<(Vec<KbTuple>, KbLoadReport)> {
    let f = File::open(path)
        .map_err(|e| Error::Config(format!("cannot open KB {}: {e}", path.display())))?;
    read_kb(BufReader::new(f), path)
}

/// Token → ascending tuple-id postings over an immutable tuple set.
#[derive(Clone, Debug)]
pub struct InvertedIndex {
    tuples: Vec<KbTuple>,
    slot: HashMap<u32, usize>,
    postings: HashMap<Token, Vec<u32>>,
}

impl PartialEq for InvertedIndex {
    fn eq(&self, other: &Self) -> bool {
        self.tuples == other.tuples && self.postings == other.postings
    }
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    format_version: u32,
    tuples: Vec<KbTuple>,
}

impl InvertedIndex {
    /// Builds postings over each tuple's tokens, skipping stopwords.
    pub fn build(mut tuples: Vec<KbTuple>) -> Result<Self> {
        tuples.sort_by_key(|t| t.id);
        if let Some(w) = tuples.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::Build(format!("duplicate tuple id {}", w[0].id)));
        }
        let mut postings: HashMap<Token, Vec<u32>> = HashMap::new();
        let mut slot = HashMap::with_capacity(tuples.len());
        for (i, t) in tuples.iter().enumerate() {
            slot.insert(t.id, i);
            for tok in t.all_tokens.iter().filter(|tok| !is_stopword(tok)) {
                postings.entry(tok.clone()).or_default().push(t.id);
            }
        }
        Ok(InvertedIndex {
            tuples,
            slot,
            postings,
        })
    }

    pub fn tuple_count(&self) -> usize {
        self.tuples.len()
    }

    pub fn tuples(&self) -> &[KbTuple] {
        &self.tuples
    }

    pub fn tuple(&self, id: u32) -> Option<&KbTuple> {
        self.slot.get(&id).map(|&i| &self.tuples[i])
    }

    pub fn postings(&self, token: &Token) -> &[u32] {
        self.postings.get(token).map_or(&[], Vec::as_slice)
    }

    /// Top `k` candidates by flat Jaccard score, ties broken by ascending id.
    pub fn retrieve_top_k(&self, fact: &SubFact, k: usize) -> Vec<(&KbTuple, f64)> {
        let query: TokenSet = fact.flat.iter().collect();
        let mut ids: Vec<u32> = query
            .iter()
            .filter(|t| !is_stopword(t))
            .flat_map(|t| self.postings(t).iter().copied())
            .collect();
        ids.sort_unstable();
        ids.dedup();
        let mut scored: Vec<(&KbTuple, f64)> = ids
            .into_iter()
            .map(|id| {
                let t = &self.tuples[self.slot[&id]];
                (t, jaccard(&query, &t.all_tokens))
            })
            .collect();
        rank(&mut scored);
        scored.truncate(k);
        scored
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path)?;
        let mut w = BufWriter::new(f);
        serde_json::to_writer(
            &mut w,
            &Snapshot {
                format_version: SNAPSHOT_VERSION,
                tuples: self.tuples.clone(),
            },
        )?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| {
            Error::Config(format!(
                "cannot open index snapshot {}: {e}",
                path.display()
            ))
        })?;
        let snap: Snapshot = serde_json::from_reader(BufReader::new(f))?;
        if snap.format_version != SNAPSHOT_VERSION {
            return Err(Error::Format(format!(
                "index snapshot version {}, expected {SNAPSHOT_VERSION}",
                snap.format_version
            )));
        }
        let mut tuples = snap.tuples;
        for t in &mut tuples {
            t.refresh();
        }
        InvertedIndex::build(tuples)
    }
}

/// Descending score, then ascending tuple id.
pub(crate) fn rank(scored: &mut [(&KbTuple, f64)]) {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.id.cmp(&b.0.id)));
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Matcher {
    /// Jaccard overlap of token sets.
    #[default]
    WordOver,
    /// `max(0, cosine)` of averaged word vectors.
    EmbAvg,
    /// Fraction of cross word pairs that are identical or have cosine above 0.9.
    EmbOver,
}

impl std::str::FromStr for Matcher {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "word_over" => Ok(Matcher::WordOver),
            "emb_avg" => Ok(Matcher::EmbAvg),
            "emb_over" => Ok(Matcher::EmbOver),
            _ => Err(Error::Config(format!("unknown matcher {s:?}"))),
        }
    }
}

/// Field-level similarity scorer, carrying word vectors for the embedding matchers.
#[derive(Clone, Copy, Debug)]
pub struct FieldScorer<'a> {
    pub matcher: Matcher,
    pub tuplized: bool,
    vectors: Option<&'a WordVectors>,
}

impl<'a> FieldScorer<'a> {
    pub fn word_over(tuplized: bool) -> Self {
        FieldScorer {
            matcher: Matcher::WordOver,
            tuplized,
            vectors: None,
        }
    }

    pub fn new(matcher: Matcher, tuplized: bool, vectors: Option<&'a WordVectors>) -> Result<Self> {
        if matcher != Matcher::WordOver && vectors.is_none() {
            return Err(Error::Config(format!(
                "matcher {matcher:?} needs word vectors"
            )));
        }
        Ok(FieldScorer {
            matcher,
            tuplized,
            vectors,
        })
    }

    /// Similarity of two token sequences. Two empty fields match fully; an
    /// empty field against a non-empty one scores 0.
    pub fn field(&self, a: &[Token], b: &[Token]) -> f64 {
        match (a.is_empty(), b.is_empty()) {
            (true, true) => return 1.0,
            (true, false) | (false, true) => return 0.0,
            _ => {}
        }
        let word_over = || jaccard(&a.iter().collect(), &b.iter().collect());
        let Some(vectors) = self.vectors else {
            return word_over();
        };
        match self.matcher {
            Matcher::WordOver => word_over(),
            Matcher::EmbAvg => match (average(a, vectors), average(b, vectors)) {
                (Some(va), Some(vb)) => cosine(&va, &vb).max(0.0),
                // no known words on a side: fall back to literal overlap
                _ => word_over(),
            },
            Matcher::EmbOver => {
                let mut hits = 0usize;
                for wa in a {
                    for wb in b {
                        let matched = wa == wb
                            || matches!(
                                (vectors.get(wa.as_str()), vectors.get(wb.as_str())),
                                (Some(x), Some(y)) if cosine(x, y) > EMB_OVER_THRESHOLD
                            );
                        hits += usize::from(matched);
                    }
                }
                hits as f64 / (a.len() * b.len()) as f64
            }
        }
    }

    /// Field-averaged (tuplized) or flat similarity of a sub-fact and a tuple.
    pub fn sim_f(&self, fact: &SubFact, tuple: &KbTuple) -> f64 {
        if self.tuplized {
            fact.fields()
                .iter()
                .zip(tuple.fields())
                .map(|(a, b)| self.field(a, b))
                .sum::<f64>()
                / 3.0
        } else {
            let flat: Vec<Token> = tuple.flat().cloned().collect();
            self.field(&fact.flat, &flat)
        }
    }
}

fn average(tokens: &[Token], vectors: &WordVectors) -> Option<Vec<f64>> {
    let mut sum = vec![0.0; vectors.dim()];
    let mut n = 0usize;
    for v in tokens.iter().filter_map(|t| vectors.get(t.as_str())) {
        for (s, x) in sum.iter_mut().zip(v) {
            *s += x;
        }
        n += 1;
    }
    (n > 0).then(|| sum.into_iter().map(|s| s / n as f64).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Retrieved {
    pub id: u32,
    pub retrieval_score: f64,
    pub sim: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LookupResult {
    /// In retrieval order.
    pub retrieved: Vec<Retrieved>,
    /// Max `sim` over `retrieved`, or 0 when nothing was retrieved.
    pub l_score: f64,
    /// `sim` of the k-th retrieved tuple, zero-padded to the retrieval depth.
    pub emb: Vec<f64>,
}

impl LookupResult {
    /// Tuple id behind `l_score` (first on ties), if any tuple scored above 0.
    pub fn best(&self) -> Option<u32> {
        if self.l_score <= 0.0 {
            return None;
        }
        self.retrieved
            .iter()
            .find(|r| r.sim == self.l_score)
            .map(|r| r.id)
    }
}

/// Retrieves the top `k` tuples for `fact` and scores each with `scorer`.
pub fn lookup(
    fact: &SubFact,
    index: &InvertedIndex,
    scorer: &FieldScorer<'_>,
    k: usize,
) -> LookupResult {
    let retrieved: Vec<Retrieved> = index
        .retrieve_top_k(fact, k)
        .into_iter()
        .map(|(t, score)| Retrieved {
            id: t.id,
            retrieval_score: score,
            sim: scorer.sim_f(fact, t),
        })
        .collect();
    let l_score = retrieved.iter().map(|r| r.sim).fold(0.0, f64::max);
    let mut emb = vec![0.0; k];
    for (e, r) in emb.iter_mut().zip(&retrieved) {
        *e = r.sim;
    }
    LookupResult {
        retrieved,
        l_score,
        emb,
    }
}

/// Every token appearing in the KB, for restricting embedding loads.
pub fn kb_words(index: &InvertedIndex) -> HashSet<String> {
    index
        .tuples()
        .iter()
        .flat_map(|t| t.flat().map(|w| w.as_str().to_string()))
        .collect()
}
