//! Run configuration, read from JSON. Every field has a default, so a
//! config file only needs the values it changes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aggregator::{Ablation, ModelDims};
use crate::ensemble::CombineMode;
use crate::error::{Error, Result};
use crate::kb::Matcher;
use crate::train::TrainConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    /// Directory holding `scitail_1.0_{train,dev,test}.tsv` (or `.txt` JSONL).
    pub data_dir: PathBuf,
    /// Word-vector file; without one the embedding table is random.
    pub embeddings: Option<PathBuf>,
    /// Replay decomposition file; ids it does not cover fall back to the
    /// heuristic decomposer.
    pub decompositions: Option<PathBuf>,
    /// Where artifacts (index, vocabulary, checkpoints, reports, cache) live.
    pub work_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            data_dir: PathBuf::from("data/scitail"),
            embeddings: None,
            decompositions: None,
            work_dir: PathBuf::from("nsnet-work"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub dims: ModelDims,
    pub vocab_cap: usize,
    pub pretrain: TrainConfig,
    pub joint: TrainConfig,
    pub pretrain_dropout: f64,
    pub joint_dropout: f64,
    pub ablation: Ablation,
    pub matcher: Matcher,
    pub tuplized: bool,
    pub ensemble_mode: CombineMode,
    pub threshold: f64,
    /// Use only the first `n` training examples.
    pub max_train_examples: Option<usize>,
    pub paths: Paths,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 13,
            dims: ModelDims::default(),
            vocab_cap: 30_000,
            pretrain: TrainConfig::default(),
            joint: TrainConfig::default(),
            pretrain_dropout: 0.1,
            joint_dropout: 0.0,
            ablation: Ablation::NONE,
            matcher: Matcher::WordOver,
            tuplized: true,
            ensemble_mode: CombineMode::Or,
            threshold: 0.5,
            max_train_examples: None,
            paths: Paths::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(s).map_err(|e| Error::Config(format!("bad config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        RunConfig::from_json(&s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Sets the master seed and the seeds derived from it.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.pretrain.seed = seed;
        self.joint.seed = seed.wrapping_add(1);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.dims;
        if [
            d.embed_dim,
            d.hidden,
            d.hybrid,
            d.compose,
            d.max_facts,
            d.top_k,
        ]
        .contains(&0)
        {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        for (name, rate) in [
            ("pretrain_dropout", self.pretrain_dropout),
            ("joint_dropout", self.joint_dropout),
        ] {
            if !(0.0..1.0).contains(&rate) {
                return Err(Error::Config(format!(
                    "{name} must be in [0, 1), got {rate}"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config(format!(
                "threshold must be in [0, 1], got {}",
                self.threshold
            )));
        }
        if self.vocab_cap < 3 {
            return Err(Error::Config(
                "vocab_cap must leave room for at least one word".into(),
            ));
        }
        Ok(())
    }
}
