//! Entailment datasets in the SciTail layouts.
//!
//! The TSV distribution has one example per line:
//! `premise \t hypothesis \t label` with label `entails` or `neutral`.
//! The JSONL distribution has one object per line with `sentence1`
//! (premise), `sentence2` (hypothesis) and `gold_label`
//! (`entailment`/`entails` or `neutral`). Example ids are `{split}-{line index}`.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::decompose::{decompose, SubFact, MAX_FACT_LEN};
use crate::error::{Error, Result};
use crate::matcher::MAX_PREMISE_LEN;
use crate::text::{normalize_tokenize, Token};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Neutral = 0,
    Entails = 1,
}

impl Label {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Label {
        if i == 1 {
            Label::Entails
        } else {
            Label::Neutral
        }
    }

    pub fn from_entails(entails: bool) -> Label {
        Label::from_index(usize::from(entails))
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "entails" | "entailment" => Ok(Label::Entails),
            "neutral" => Ok(Label::Neutral),
            other => Err(Error::Format(format!("unknown label {other:?}"))),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Neutral => "neutral",
            Label::Entails => "entails",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }

    pub fn tsv_name(self) -> String {
        format!("scitail_1.0_{}.tsv", self.name())
    }

    pub fn jsonl_name(self) -> String {
        format!("scitail_1.0_{}.txt", self.name())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "dev" | "valid" | "validation" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split {other:?}"))),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntailExample {
    pub id: String,
    pub premise: String,
    pub premise_tokens: Vec<Token>,
    pub hypothesis: String,
    pub hypothesis_tokens: Vec<Token>,
    pub gold: Label,
    pub sub_facts: Vec<SubFact>,
}

impl EntailExample {
    /// Tokenizes, truncates and decomposes with the heuristic decomposer.
    pub fn new(
        id: impl Into<String>,
        premise: &str,
        hypothesis: &str,
        gold: Label,
    ) -> Result<Self> {
        let premise_tokens = normalize_tokenize(premise, MAX_PREMISE_LEN);
        let hypothesis_tokens = normalize_tokenize(hypothesis, MAX_FACT_LEN);
        if premise_tokens.is_empty() {
            return Err(Error::Format("premise has no tokens".into()));
        }
        if hypothesis_tokens.is_empty() {
            return Err(Error::Format("hypothesis has no tokens".into()));
        }
        Ok(EntailExample {
            id: id.into(),
            premise: premise.to_string(),
            premise_tokens,
            hypothesis: hypothesis.to_string(),
            hypothesis_tokens,
            gold,
            sub_facts: decompose(hypothesis),
        })
    }
}

fn with_line(origin: &Path, line: usize, e: Error) -> Error {
    match e {
        Error::Format(m) => Error::ingest(origin, line, m),
        other => other,
    }
}

/// Parses the TSV layout.
pub fn read_scitail_tsv<R: BufRead>(
    reader: R,
    origin: &Path,
    split: Split,
) -> Result<Vec<EntailExample>> {
    let mut out = Vec::new();
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
                format!("expected 3 tab-separated columns, found {}", cols.len()),
            ));
        }
        let id = format!("{split}-{}", out.len());
        let example = cols[2]
            .parse()
            .and_then(|gold| EntailExample::new(id, cols[0], cols[1], gold))
            .map_err(|e| with_line(origin, n + 1, e))?;
        out.push(example);
    }
    Ok(out)
}

#[derive(Deserialize)]
struct JsonRecord {
    sentence1: String,
    sentence2: String,
    gold_label: String,
}

/// Parses the JSONL layout.
pub fn read_scitail_jsonl<R: BufRead>(
    reader: R,
    origin: &Path,
    split: Split,
) -> Result<Vec<EntailExample>> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: JsonRecord = serde_json::from_str(&line)
            .map_err(|e| Error::ingest(origin, n + 1, format!("bad JSON record: {e}")))?;
        let id = format!("{split}-{}", out.len());
        let example = rec
            .gold_label
            .parse()
            .and_then(|gold| EntailExample::new(id, &rec.sentence1, &rec.sentence2, gold))
            .map_err(|e| with_line(origin, n + 1, e))?;
        out.push(example);
    }
    Ok(out)
}

/// The file for `split` in `dir`, preferring the TSV layout.
pub fn split_file(dir: &Path, split: Split) -> Result<PathBuf> {
    let tsv = dir.join(split.tsv_name());
    if tsv.is_file() {
        return Ok(tsv);
    }
    let jsonl = dir.join(split.jsonl_name());
    if jsonl.is_file() {
        return Ok(jsonl);
    }
    Err(Error::Config(format!(
        "no {} split in {} (looked for {} and {})",
        split,
        dir.display(),
        split.tsv_name(),
        split.jsonl_name()
    )))
}

/// Reads one split from `dir`. Sub-facts come from `replay` where it has
/// an entry for the example id.
pub fn ingest_scitail(
    dir: &Path,
    split: Split,
    replay: Option<&BTreeMap<String, Vec<SubFact>>>,
) -> Result<Vec<EntailExample>> {
    let path = split_file(dir, split)?;
    let reader = BufReader::new(File::open(&path)?);
    let mut examples = if path.extension().is_some_and(|e| e == "tsv") {
        read_scitail_tsv(reader, &path, split)?
    } else {
        read_scitail_jsonl(reader, &path, split)?
    };
    if let Some(replay) = replay {
        let mut replaced = 0usize;
        for ex in &mut examples {
            if let Some(facts) = replay.get(&ex.id) {
                ex.sub_facts = facts.clone();
                replaced += 1;
            }
        }
        log::info!(
            "{split}: {replaced} of {} decompositions taken from replay file",
            examples.len()
        );
    }
    let stats = SplitStats::of(&examples);
    log::info!(
        "{split}: {} examples, {} entails, {} neutral",
        stats.total,
        stats.entails,
        stats.neutral
    );
    Ok(examples)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitStats {
    pub total: usize,
    pub entails: usize,
    pub neutral: usize,
}

impl SplitStats {
    pub fn of(examples: &[EntailExample]) -> Self {
        let entails = examples.iter().filter(|e| e.gold == Label::Entails).count();
        SplitStats {
            total: examples.len(),
            entails,
            neutral: examples.len() - entails,
        }
    }

    /// The more frequent label; neutral on ties.
    pub fn majority(&self) -> Label {
        if self.entails > self.neutral {
            Label::Entails
        } else {
            Label::Neutral
        }
    }

    /// Fraction of examples carrying `label`.
    pub fn rate(&self, label: Label) -> f64 {
        let n = match label {
            Label::Entails => self.entails,
            Label::Neutral => self.neutral,
        };
        if self.total == 0 {
            0.0
        } else {
            n as f64 / self.total as f64
        }
    }
}
