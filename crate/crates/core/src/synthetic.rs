//! A small generated science corpus in the on-disk formats the pipeline
//! reads. Used by the examples and tests when the real data is absent.
//!
//! Positive examples either restate a premise clause or add a second
//! clause that is a KB fact missing from the premise (a knowledge gap).
//! Negative examples swap in an object that neither source supports.
//! Gap facts for train come from one half of the KB and gap facts for dev
//! and test from the other, so on held-out pairs only the KB lookup can
//! vouch for them.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{Label, Split};
use crate::error::Result;

#[rustfmt::skip]
const SUBJECTS: &[&str] = &[
    "plants", "animals", "the sun", "water", "cells", "magnets", "bacteria", "volcanoes", "rocks",
    "the moon", "fungi", "birds", "fish", "insects", "glaciers", "clouds", "roots", "leaves",
    "metals", "seeds",
];

const PREDICATES: &[&str] = &[
    "produce", "need", "contain", "absorb", "release", "attract", "require", "emit", "conduct",
    "reflect",
];

#[rustfmt::skip]
const OBJECTS: &[&str] = &[
    "oxygen", "energy", "heat", "light", "nutrients", "minerals", "carbon dioxide", "water vapor",
    "iron", "sugar", "electricity", "protein", "sediment", "pollen", "spores", "salt", "nitrogen",
    "ice", "soil", "sound",
];

#[derive(Clone, Debug, PartialEq)]
pub struct Fact {
    pub subject: &'static str,
    pub predicate: &'static str,
    pub object: &'static str,
}

impl Fact {
    fn sentence(&self) -> String {
        format!("{} {} {}", self.subject, self.predicate, self.object)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pair {
    pub premise: String,
    pub hypothesis: String,
    pub label: Label,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub kb: Vec<Fact>,
    pub train: Vec<Pair>,
    pub dev: Vec<Pair>,
    pub test: Vec<Pair>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Sizes {
    pub train: usize,
    pub dev: usize,
    pub test: usize,
    pub kb_facts_per_subject: usize,
}

impl Default for Sizes {
    fn default() -> Self {
        Sizes {
            train: 1000,
            dev: 100,
            test: 200,
            kb_facts_per_subject: 10,
        }
    }
}

impl Corpus {
    pub fn generate(sizes: Sizes, seed: u64) -> Corpus {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut kb = Vec::new();
        for &subject in SUBJECTS {
            let mut objects = OBJECTS.to_vec();
            objects.shuffle(&mut rng);
            for &object in objects.iter().take(sizes.kb_facts_per_subject) {
                kb.push(Fact {
                    subject,
                    predicate: PREDICATES[rng.gen_range(0..PREDICATES.len())],
                    object,
                });
            }
        }
        let mut make = |n: usize, pool: usize| {
            (0..n)
                .map(|_| pair(&kb, pool, &mut rng))
                .collect::<Vec<_>>()
        };
        let (train, dev, test) = (
            make(sizes.train, 0),
            make(sizes.dev, 1),
            make(sizes.test, 1),
        );
        Corpus {
            kb,
            train,
            dev,
            test,
        }
    }

    pub fn split(&self, split: Split) -> &[Pair] {
        match split {
            Split::Train => &self.train,
            Split::Dev => &self.dev,
            Split::Test => &self.test,
        }
    }

    /// Writes `kb.tsv` and `scitail_1.0_{split}.tsv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let kb: String = self
            .kb
            .iter()
            .map(|f| format!("{}\t{}\t{}\n", f.subject, f.predicate, f.object))
            .collect();
        fs::write(dir.join("kb.tsv"), kb)?;
        for split in Split::ALL {
            let body: String = self
                .split(split)
                .iter()
                .map(|p| format!("{}\t{}\t{}\n", p.premise, p.hypothesis, p.label))
                .collect();
            fs::write(dir.join(split.tsv_name()), body)?;
        }
        Ok(())
    }
}

fn unsupported_object(
    kb: &[Fact],
    subject: &str,
    exclude: &[&str],
    rng: &mut ChaCha8Rng,
) -> &'static str {
    loop {
        let o = OBJECTS[rng.gen_range(0..OBJECTS.len())];
        if !exclude.contains(&o) && !kb.iter().any(|f| f.subject == subject && f.object == o) {
            return o;
        }
    }
}

/// `pool` selects which half of the KB (by index parity) supplies gap facts.
fn pair(kb: &[Fact], pool: usize, rng: &mut ChaCha8Rng) -> Pair {
    let stated = &kb[rng.gen_range(0..kb.len())];
    let other = &kb[rng.gen_range(0..kb.len())];
    let premise = format!("{} and {}.", stated.sentence(), other.sentence());
    let entails = rng.gen_bool(0.4);
    let known: Vec<&Fact> = kb
        .iter()
        .enumerate()
        .filter(|(i, f)| i % 2 == pool && f.subject == stated.subject && f.object != stated.object)
        .map(|(_, f)| f)
        .collect();
    let gap = rng.gen_bool(0.5) && !known.is_empty();
    let hypothesis = if gap {
        let extra = known[rng.gen_range(0..known.len())];
        let object = if entails {
            extra.object
        } else {
            unsupported_object(kb, stated.subject, &[stated.object, other.object], rng)
        };
        format!(
            "{} {} {} and {} {}.",
            stated.subject, stated.predicate, stated.object, extra.predicate, object
        )
    } else {
        let object = if entails {
            stated.object
        } else {
            unsupported_object(kb, stated.subject, &[stated.object, other.object], rng)
        };
        format!("{} {} {}.", stated.subject, stated.predicate, object)
    };
    Pair {
        premise,
        hypothesis,
        label: Label::from_entails(entails),
    }
}
