//! Pre-trained word vectors and the vocabulary-indexed embedding table.
//!
//! The file format is the plain-text GloVe distribution: one word per line
//! followed by `dim` space-separated floats.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::text::{Token, Vocabulary, PAD_ID, UNK_ID};

pub const DEFAULT_DIM: usize = 300;
const OOV_RANGE: f64 = 0.05;

/// Word → vector map read from an embedding file.
#[derive(Clone, Debug, Default)]
pub struct WordVectors {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl WordVectors {
    pub fn new(dim: usize) -> Self {
        WordVectors {
            dim,
            vectors: HashMap::new(),
        }
    }

    /// Reads every line, keeping only words accepted by `keep`. Arity and
    /// float syntax are checked on every line, kept or not. The first
    /// occurrence of a duplicated word wins.
    pub fn read<R: BufRead>(
        reader: R,
        origin: &Path,
        dim: usize,
        keep: impl Fn(&str) -> bool,
    ) -> Result<Self> {
        let mut out = WordVectors::new(dim);
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = n + 1;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(' ').filter(|s| !s.is_empty());
            let word = parts.next().unwrap_or_default();
            let mut values = Vec::with_capacity(dim);
            for p in parts {
                let v: f64 = p.parse().map_err(|_| {
                    Error::ingest(origin, lineno, format!("unparseable float {p:?}"))
                })?;
                if !v.is_finite() {
                    return Err(Error::ingest(
                        origin,
                        lineno,
                        format!("non-finite value {p:?}"),
                    ));
                }
                values.push(v);
            }
            if values.len() != dim {
                return Err(Error::ingest(
                    origin,
                    lineno,
                    format!("expected {dim} values for {word:?}, found {}", values.len()),
                ));
            }
            if keep(word) && !out.vectors.contains_key(word) {
                out.vectors.insert(word.to_string(), values);
            }
        }
        Ok(out)
    }

    pub fn load(path: &Path, dim: usize, keep: impl Fn(&str) -> bool) -> Result<Self> {
        let f = File::open(path).map_err(|e| {
            Error::Config(format!("cannot open embeddings {}: {e}", path.display()))
        })?;
        WordVectors::read(BufReader::new(f), path, dim, keep)
    }

    /// Loads only the words in `words`.
    pub fn load_for(path: &Path, dim: usize, words: &HashSet<String>) -> Result<Self> {
        WordVectors::load(path, dim, |w| words.contains(w))
    }

    pub fn insert(&mut self, word: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::Contract(format!(
                "vector of length {} for table of dim {}",
                vector.len(),
                self.dim
            )));
        }
        self.vectors.entry(word.into()).or_insert(vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(word).map(Vec::as_slice)
    }
}

/// Vocabulary-indexed dense vectors. Row [`PAD_ID`] is all zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    pub rows: Tensor,
    pub trainable: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LoadReport {
    pub found: usize,
    pub oov: usize,
}

impl EmbeddingTable {
    /// Every non-padding row drawn uniformly from ±0.05.
    pub fn random(vocab: &Vocabulary, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Tensor::zeros(vocab.len(), dim);
        for r in 0..vocab.len() {
            for v in rows.row_mut(r) {
                *v = rng.gen_range(-OOV_RANGE..=OOV_RANGE);
            }
        }
        rows.row_mut(PAD_ID).fill(0.0);
        EmbeddingTable {
            rows,
            trainable: true,
        }
    }

    /// Copies known words from `vectors`; the rest (including the unknown
    /// token) keep their seeded random initialization.
    pub fn from_vectors(
        vocab: &Vocabulary,
        vectors: &WordVectors,
        seed: u64,
    ) -> (Self, LoadReport) {
        let mut table = EmbeddingTable::random(vocab, vectors.dim(), seed);
        let mut report = LoadReport { found: 0, oov: 0 };
        for id in 0..vocab.len() {
            if id == PAD_ID || id == UNK_ID {
                continue;
            }
            let word = vocab.word(id).expect("id in range");
            match vectors.get(word) {
                Some(v) => {
                    table.rows.row_mut(id).copy_from_slice(v);
                    report.found += 1;
                }
                None => report.oov += 1,
            }
        }
        (table, report)
    }

    pub fn dim(&self) -> usize {
        self.rows.cols()
    }

    pub fn row(&self, id: usize) -> &[f64] {
        self.rows.row(id)
    }
}

/// Reads an embedding file for `vocab`. Out-of-vocabulary rows are seeded random.
pub fn load_embeddings(
    path: &Path,
    vocab: &Vocabulary,
    dim: usize,
    seed: u64,
) -> Result<(EmbeddingTable, LoadReport)> {
    let vectors = WordVectors::load(path, dim, |w| vocab.get(w).is_some())?;
    let (table, report) = EmbeddingTable::from_vectors(vocab, &vectors, seed);
    log::info!(
        "embeddings: {} of {} vocabulary words found, {} out of vocabulary",
        report.found,
        vocab.len() - 2,
        report.oov
    );
    Ok((table, report))
}

/// Mean of the rows of non-padding tokens; all zeros when there are none.
pub fn encode_average(tokens: &[Token], vocab: &Vocabulary, table: &EmbeddingTable) -> Vec<f64> {
    encode_average_ids(&vocab.ids(tokens), table)
}

pub fn encode_average_ids(ids: &[usize], table: &EmbeddingTable) -> Vec<f64> {
    let mut out = vec![0.0; table.dim()];
    let mut k = 0usize;
    for &id in ids.iter().filter(|&&id| id != PAD_ID) {
        for (o, v) in out.iter_mut().zip(table.row(id)) {
            *o += v;
        }
        k += 1;
    }
    if k > 0 {
        for o in &mut out {
            *o /= k as f64;
        }
    }
    out
}

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}
