//! End-to-end workflow over a work directory of named artifacts:
//! `index.json`, `vocab.txt`, `pretrained.ckpt`, `nsnet.ckpt`,
//! `decompositions/`, `reports/` and `cache/`.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregator::{
    init_nsnet, nsnet_predict, Ablation, FactFeatures, NsnetExample, NsnetObjective,
};
use crate::autodiff::ParamStore;
use crate::cache::{Cache, CacheKey};
use crate::config::RunConfig;
use crate::data::{ingest_scitail, EntailExample, Label, Split, SplitStats};
use crate::decompose::{ingest_decompositions, write_decompositions, SubFact};
use crate::embedding::{load_embeddings, EmbeddingTable, WordVectors};
use crate::ensemble::{combine_fact, ensemble_predict, FactScores};
use crate::entail::{self, entail, EncodedPair, EntailObjective};
use crate::error::{Error, Result};
use crate::eval::{EvalReport, ModelKind, Prediction};
use crate::explain::{Explanation, FactBlock};
use crate::kb::{kb_words, load_kb, lookup, FieldScorer, InvertedIndex, Matcher};
use crate::matcher::symbolic_match;
use crate::text::{join, Vocabulary};
use crate::train::{fit, EpochLog};

pub const INDEX: &str = "index.json";
pub const VOCAB: &str = "vocab.txt";
pub const PRETRAINED: &str = "pretrained.ckpt";
pub const NSNET: &str = "nsnet.ckpt";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexSummary {
    pub loaded: usize,
    pub skipped: usize,
    pub path: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub best_epoch: usize,
    pub history: Vec<EpochLog>,
    pub checkpoint: PathBuf,
}

pub struct Pipeline {
    pub config: RunConfig,
}

impl Pipeline {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        Ok(Pipeline { config })
    }

    pub fn artifact(&self, name: &str) -> PathBuf {
        self.config.paths.work_dir.join(name)
    }

    fn require(&self, name: &str, produced_by: &str) -> Result<PathBuf> {
        let path = self.artifact(name);
        if path.exists() {
            Ok(path)
        } else {
            Err(Error::Config(format!(
                "missing artifact {name} ({}); run `nsnet {produced_by}` first",
                path.display()
            )))
        }
    }

    fn reports_dir(&self) -> PathBuf {
        self.artifact("reports")
    }

    /// Reads a KB file and writes the index snapshot.
    pub fn index(&self, kb: &Path) -> Result<IndexSummary> {
        let (tuples, report) = load_kb(kb)?;
        let index = InvertedIndex::build(tuples)?;
        fs::create_dir_all(&self.config.paths.work_dir)?;
        let path = self.artifact(INDEX);
        index.save(&path)?;
        log::info!(
            "indexed {} KB tuples ({} skipped)",
            report.loaded,
            report.skipped
        );
        Ok(IndexSummary {
            loaded: report.loaded,
            skipped: report.skipped,
            path,
        })
    }

    pub fn load_index(&self) -> Result<InvertedIndex> {
        InvertedIndex::load(&self.require(INDEX, "index <kb.tsv>")?)
    }

    fn replay(&self) -> Result<Option<BTreeMap<String, Vec<SubFact>>>> {
        self.config
            .paths
            .decompositions
            .as_deref()
            .map(ingest_decompositions)
            .transpose()
    }

    /// Loads a split, honouring the replay file and the training-set cap.
    pub fn load_split(&self, split: Split) -> Result<Vec<EntailExample>> {
        let replay = self.replay()?;
        let mut examples = ingest_scitail(&self.config.paths.data_dir, split, replay.as_ref())?;
        if split == Split::Train {
            if let Some(n) = self.config.max_train_examples {
                examples.truncate(n);
            }
        }
        Ok(examples)
    }

    /// Writes the sub-facts used for `split` in the replay format.
    pub fn decompose(&self, split: Split) -> Result<PathBuf> {
        let examples = self.load_split(split)?;
        let dir = self.artifact("decompositions");
        fs::create_dir_all(&dir)?;
        let path = dir.join(format!("{split}.tsv"));
        let mut w = BufWriter::new(File::create(&path)?);
        write_decompositions(
            &mut w,
            examples
                .iter()
                .map(|e| (e.id.as_str(), e.sub_facts.as_slice())),
        )?;
        w.flush()?;
        Ok(path)
    }

    fn build_vocab(&self, train: &[EntailExample]) -> Vocabulary {
        let tokens = train.iter().flat_map(|e| {
            e.premise_tokens
                .iter()
                .chain(&e.hypothesis_tokens)
                .chain(e.sub_facts.iter().flat_map(|f| f.flat.iter()))
        });
        Vocabulary::build(tokens, self.config.vocab_cap)
    }

    pub fn load_vocab(&self) -> Result<Vocabulary> {
        let path = self.require(VOCAB, "pretrain")?;
        Vocabulary::read(BufReader::new(File::open(path)?))
    }

    fn embedding_table(&self, vocab: &Vocabulary) -> Result<EmbeddingTable> {
        let dim = self.config.dims.embed_dim;
        match &self.config.paths.embeddings {
            Some(path) => Ok(load_embeddings(path, vocab, dim, self.config.seed)?.0),
            None => {
                log::warn!("no embedding file configured; using a random table");
                Ok(EmbeddingTable::random(vocab, dim, self.config.seed))
            }
        }
    }

    /// Trains the entailment network on whole (premise, hypothesis) pairs.
    pub fn pretrain(&self) -> Result<TrainSummary> {
        let train = self.load_split(Split::Train)?;
        let dev = self.load_split(Split::Dev)?;
        let vocab = self.build_vocab(&train);
        fs::create_dir_all(&self.config.paths.work_dir)?;
        vocab.write(BufWriter::new(File::create(self.artifact(VOCAB))?))?;

        let table = self.embedding_table(&vocab)?;
        let mut params = ParamStore::new(self.config.seed);
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        entail::init_params(&mut params, &table, self.config.dims.entail(), &mut rng)?;

        let obj = EntailObjective {
            dropout: self.config.pretrain_dropout,
        };
        let train_pairs = encode_pairs(&vocab, &train);
        let dev_pairs = encode_pairs(&vocab, &dev);
        let outcome = fit(
            &obj,
            params,
            &train_pairs,
            &dev_pairs,
            &self.config.pretrain,
        )?;
        let checkpoint = self.artifact(PRETRAINED);
        outcome.best.save(&checkpoint)?;
        self.save_history("pretrain", &outcome.history)?;
        Ok(TrainSummary {
            best_epoch: outcome.best_epoch,
            history: outcome.history,
            checkpoint,
        })
    }

    fn save_history(&self, name: &str, history: &[EpochLog]) -> Result<()> {
        let dir = self.reports_dir();
        fs::create_dir_all(&dir)?;
        fs::write(
            dir.join(format!("{name}-log.json")),
            serde_json::to_string_pretty(history)?,
        )?;
        Ok(())
    }

    fn load_pretrained(&self) -> Result<ParamStore> {
        ParamStore::load(&self.require(PRETRAINED, "pretrain")?)
    }

    fn load_nsnet(&self) -> Result<ParamStore> {
        ParamStore::load(&self.require(NSNET, "train")?)
    }

    fn matcher_vectors(
        &self,
        index: &InvertedIndex,
        examples: &[EntailExample],
    ) -> Result<Option<WordVectors>> {
        if self.config.matcher == Matcher::WordOver {
            return Ok(None);
        }
        let path = self.config.paths.embeddings.as_deref().ok_or_else(|| {
            Error::Config(format!(
                "matcher {:?} needs paths.embeddings",
                self.config.matcher
            ))
        })?;
        let mut words = kb_words(index);
        for e in examples {
            for f in &e.sub_facts {
                words.extend(f.flat.iter().map(|t| t.as_str().to_string()));
            }
        }
        Ok(Some(WordVectors::load_for(
            path,
            self.config.dims.embed_dim,
            &words,
        )?))
    }

    /// Symbolic features for every example, cached by content hash.
    pub fn features(
        &self,
        examples: &[EntailExample],
        vocab: &Vocabulary,
        index: &InvertedIndex,
    ) -> Result<Vec<NsnetExample>> {
        let dims = self.config.dims;
        let mut key = CacheKey::new("nsnet-features-v1");
        key.json(&(
            self.config.matcher,
            self.config.tuplized,
            dims.top_k,
            dims.max_facts,
        ))?
        .json(&self.config.paths.embeddings)?
        .json(&(0..vocab.len()).map(|i| vocab.word(i)).collect::<Vec<_>>())?
        .json(&index.tuples())?
        .json(&examples)?;
        let key = key.finish();
        let cache = Cache::new(self.artifact("cache"));
        if let Some(hit) = cache.get::<Vec<NsnetExample>>(&key) {
            log::info!("feature cache hit {key}");
            return Ok(hit);
        }

        let vectors = self.matcher_vectors(index, examples)?;
        let scorer = FieldScorer::new(self.config.matcher, self.config.tuplized, vectors.as_ref())?;
        let out: Vec<NsnetExample> = examples
            .par_iter()
            .map(|e| featurize(e, vocab, index, &scorer, dims.top_k, dims.max_facts))
            .collect();
        if let Err(e) = cache.put(&key, &out) {
            log::warn!("could not write feature cache: {e}");
        }
        Ok(out)
    }

    /// Joint training of the aggregator, the entailment network and the embeddings.
    pub fn train(&self) -> Result<TrainSummary> {
        let pretrained = self.load_pretrained()?;
        let vocab = self.load_vocab()?;
        let index = self.load_index()?;
        let train = self.load_split(Split::Train)?;
        let dev = self.load_split(Split::Dev)?;
        let train_x = self.features(&train, &vocab, &index)?;
        let dev_x = self.features(&dev, &vocab, &index)?;

        let params = init_nsnet(&pretrained, self.config.dims, self.config.seed)?;
        let obj = NsnetObjective {
            dims: self.config.dims,
            ablation: self.config.ablation,
            dropout: self.config.joint_dropout,
        };
        let outcome = fit(&obj, params, &train_x, &dev_x, &self.config.joint)?;
        let checkpoint = self.artifact(NSNET);
        outcome.best.save(&checkpoint)?;
        self.save_history("train", &outcome.history)?;
        Ok(TrainSummary {
            best_epoch: outcome.best_epoch,
            history: outcome.history,
            checkpoint,
        })
    }

    /// Scores `model` on `split` and writes the text and JSON reports.
    pub fn evaluate(
        &self,
        model: ModelKind,
        split: Split,
        ablation: Ablation,
    ) -> Result<EvalReport> {
        let examples = self.load_split(split)?;
        let predictions = match model {
            ModelKind::Majority => {
                let majority = SplitStats::of(&self.load_split(Split::Train)?).majority();
                examples
                    .iter()
                    .map(|e| {
                        prediction(
                            e,
                            majority == Label::Entails,
                            f64::from(u8::from(majority == Label::Entails)),
                        )
                    })
                    .collect()
            }
            ModelKind::NeuralBase => {
                let params = self.load_pretrained()?;
                let vocab = self.load_vocab()?;
                examples
                    .par_iter()
                    .map(|e| {
                        let p = entail(
                            &params,
                            &vocab.ids(&e.hypothesis_tokens),
                            &vocab.ids(&e.premise_tokens),
                        )?
                        .n_prob;
                        Ok(prediction(e, p > 0.5, p))
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            ModelKind::NeuralDecomposed | ModelKind::Ensemble => {
                let params = self.load_pretrained()?;
                let vocab = self.load_vocab()?;
                let index = self.load_index()?;
                let feats = self.features(&examples, &vocab, &index)?;
                examples
                    .par_iter()
                    .zip(&feats)
                    .map(|(e, x)| {
                        let scores = module_scores(&params, x, ablation)?;
                        let (entails, p) = if model == ModelKind::Ensemble {
                            ensemble_predict(
                                &scores,
                                self.config.ensemble_mode,
                                self.config.threshold,
                            )?
                        } else {
                            let p = scores.iter().map(|s| s.n).sum::<f64>() / scores.len() as f64;
                            (p > self.config.threshold, p)
                        };
                        Ok(prediction(e, entails, p))
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            ModelKind::Nsnet => {
                let params = self.load_nsnet()?;
                let vocab = self.load_vocab()?;
                let index = self.load_index()?;
                let feats = self.features(&examples, &vocab, &index)?;
                let dims = self.config.dims;
                examples
                    .par_iter()
                    .zip(&feats)
                    .map(|(e, x)| {
                        let p = nsnet_predict(&params, x, dims, ablation)?.prob_entail;
                        Ok(prediction(e, p > 0.5, p))
                    })
                    .collect::<Result<Vec<_>>>()?
            }
        };
        let report = EvalReport::new(model, split, ablation, predictions, self.config.clone());
        report.save(&self.reports_dir())?;
        Ok(report)
    }

    /// Explains the example with the given id (`{split}-{index}`).
    pub fn explain(&self, id: &str) -> Result<Explanation> {
        let split: Split = id
            .split_once('-')
            .map(|(s, _)| s)
            .unwrap_or(id)
            .parse()
            .map_err(|_| Error::NotFound(format!("no example with id {id:?}")))?;
        let examples = self.load_split(split)?;
        let example = examples
            .into_iter()
            .find(|e| e.id == id)
            .ok_or_else(|| Error::NotFound(format!("no example with id {id:?}")))?;
        self.explain_example(&example)
    }

    /// Runs every model on a single premise/hypothesis pair.
    pub fn predict(&self, premise: &str, hypothesis: &str) -> Result<Explanation> {
        let mut e = EntailExample::new("input", premise, hypothesis, Label::Neutral)?;
        if let Some(replay) = self.replay()? {
            if let Some(f) = replay.get("input") {
                e.sub_facts = f.clone();
            }
        }
        let mut out = self.explain_example(&e)?;
        out.gold = None;
        Ok(out)
    }

    fn explain_example(&self, e: &EntailExample) -> Result<Explanation> {
        let pretrained = self.load_pretrained()?;
        let vocab = self.load_vocab()?;
        let index = self.load_index()?;
        let x = self
            .features(std::slice::from_ref(e), &vocab, &index)?
            .remove(0);
        let ablation = self.config.ablation;
        let scores = module_scores(&pretrained, &x, ablation)?;
        let mode = self.config.ensemble_mode;
        let facts = x
            .facts
            .iter()
            .zip(&scores)
            .map(|(f, s)| {
                Ok(FactBlock {
                    fact: format!(
                        "{} | {} | {}",
                        join(&f.fact.subject),
                        join(&f.fact.predicate),
                        join(&f.fact.object)
                    ),
                    n: s.n,
                    m: s.m,
                    l: s.l,
                    best_tuple: if s.l > 0.0 {
                        f.best_tuple
                            .and_then(|id| index.tuple(id))
                            .map(|t| t.display())
                    } else {
                        None
                    },
                    combined: combine_fact(s.n, s.m, s.l, mode)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let (ens, ens_p) = ensemble_predict(&scores, mode, self.config.threshold)?;
        let nsnet = if self.artifact(NSNET).exists() {
            Some(nsnet_predict(&self.load_nsnet()?, &x, self.config.dims, ablation)?.prob_entail)
        } else {
            None
        };
        Ok(Explanation {
            id: e.id.clone(),
            premise: e.premise.clone(),
            hypothesis: e.hypothesis.clone(),
            gold: Some(e.gold),
            facts,
            ensemble_prob: ens_p,
            ensemble_label: Label::from_entails(ens),
            nsnet_prob: nsnet,
            nsnet_label: nsnet.map(|p| Label::from_entails(p > 0.5)),
        })
    }
}

fn prediction(e: &EntailExample, entails: bool, prob: f64) -> Prediction {
    Prediction {
        id: e.id.clone(),
        gold: e.gold,
        predicted: Label::from_entails(entails),
        prob_entail: prob,
    }
}

/// `(hypothesis, premise)` id pairs for training the entailment network alone.
pub fn encode_pairs(vocab: &Vocabulary, examples: &[EntailExample]) -> Vec<EncodedPair> {
    examples
        .iter()
        .map(|e| EncodedPair {
            fact_ids: vocab.ids(&e.hypothesis_tokens),
            premise_ids: vocab.ids(&e.premise_tokens),
            label: e.gold.index(),
        })
        .collect()
}

/// Computes the non-differentiable features of one example.
pub fn featurize(
    e: &EntailExample,
    vocab: &Vocabulary,
    index: &InvertedIndex,
    scorer: &FieldScorer<'_>,
    top_k: usize,
    max_facts: usize,
) -> NsnetExample {
    let facts = e
        .sub_facts
        .iter()
        .take(max_facts)
        .map(|f| {
            let found = lookup(f, index, scorer, top_k);
            FactFeatures {
                fact: f.clone(),
                ids: vocab.ids(&f.flat),
                m_score: symbolic_match(f, &e.premise_tokens),
                l_score: found.l_score,
                best_tuple: found.best(),
                emb: found.emb,
            }
        })
        .collect();
    NsnetExample {
        facts,
        premise_ids: vocab.ids(&e.premise_tokens),
        label: e.gold.index(),
    }
}

/// Per-sub-fact `(n, m, l)` with the pretrained network supplying `n`.
pub fn module_scores(
    pretrained: &ParamStore,
    x: &NsnetExample,
    ablation: Ablation,
) -> Result<Vec<FactScores>> {
    x.facts
        .iter()
        .map(|f| {
            Ok(FactScores {
                n: entail(pretrained, &f.ids, &x.premise_ids)?.n_prob,
                m: if ablation.disable_matcher {
                    0.0
                } else {
                    f.m_score
                },
                l: if ablation.disable_lookup {
                    0.0
                } else {
                    f.l_score
                },
            })
        })
        .collect()
}
