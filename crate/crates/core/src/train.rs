//! Mini-batch training loop shared by the entailment model and the aggregator.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{softmax_in_place, Adam, AdamConfig, Grads, Graph, ParamStore, Var};
use crate::error::{Error, Result};

/// A classifier trained with cross-entropy over two classes.
pub trait Objective: Sync {
    type Example: Sync;

    /// Builds the graph for one example and returns its `1 x 2` logits.
    fn logits(&self, g: &mut Graph<'_>, ex: &Self::Example) -> Result<Var>;

    fn label(&self, ex: &Self::Example) -> usize;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Also score the training set in evaluation mode after every epoch.
    pub eval_train: bool,
    /// Stop once evaluation-mode training accuracy reaches this value.
    pub stop_at_train_accuracy: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 25,
            batch_size: 32,
            adam: AdamConfig::default(),
            seed: 13,
            eval_train: false,
            stop_at_train_accuracy: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    /// Accuracy of the running (training-mode) predictions.
    pub running_accuracy: f64,
    pub train_accuracy: Option<f64>,
    pub valid_accuracy: Option<f64>,
}

pub struct TrainOutcome {
    /// Parameters from the epoch with the best validation accuracy (the
    /// last epoch when there is no validation set).
    pub best: ParamStore,
    pub best_epoch: usize,
    pub history: Vec<EpochLog>,
}

/// Entailment probability (class 1) for every example, in input order.
pub fn predict_probs<O: Objective>(
    obj: &O,
    params: &ParamStore,
    examples: &[O::Example],
) -> Result<Vec<f64>> {
    examples
        .par_iter()
        .map(|ex| {
            let mut g = Graph::new(params);
            let logits = obj.logits(&mut g, ex)?;
            Ok(prob_of_entails(g.value(logits).data()))
        })
        .collect()
}

pub fn prob_of_entails(logits: &[f64]) -> f64 {
    let mut p = logits.to_vec();
    softmax_in_place(&mut p);
    p[1]
}

pub fn accuracy<O: Objective>(
    obj: &O,
    params: &ParamStore,
    examples: &[O::Example],
) -> Result<f64> {
    if examples.is_empty() {
        return Ok(0.0);
    }
    let probs = predict_probs(obj, params, examples)?;
    let correct = probs
        .iter()
        .zip(examples)
        .filter(|(p, ex)| usize::from(**p > 0.5) == obj.label(ex))
        .count();
    Ok(correct as f64 / examples.len() as f64)
}

/// Mean cross-entropy in evaluation mode.
pub fn mean_loss<O: Objective>(
    obj: &O,
    params: &ParamStore,
    examples: &[O::Example],
) -> Result<f64> {
    let mut total = 0.0;
    for ex in examples {
        let mut g = Graph::new(params);
        let logits = obj.logits(&mut g, ex)?;
        let loss = g.cross_entropy(logits, obj.label(ex))?;
        total += g.value(loss).item();
    }
    Ok(total / examples.len().max(1) as f64)
}

/// Trains `params` in place on `train`, keeping the best-validation snapshot.
///
/// Runs single-threaded; for a fixed seed and example order the result is
/// bit-for-bit reproducible.
pub fn fit<O: Objective>(
    obj: &O,
    mut params: ParamStore,
    train: &[O::Example],
    valid: &[O::Example],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    if train.is_empty() {
        return Err(Error::Contract("training set is empty".into()));
    }
    if cfg.batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(cfg.adam);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::new();
    let mut best: Option<(f64, usize, ParamStore)> = None;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = Grads::new(&params);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let ex = &train[i];
                let label = obj.label(ex);
                let mut g = Graph::training(&params, rng.gen());
                let logits = obj.logits(&mut g, ex)?;
                correct += usize::from(
                    usize::from(prob_of_entails(g.value(logits).data()) > 0.5) == label,
                );
                let loss = g.cross_entropy(logits, label)?;
                loss_sum += g.value(loss).item();
                g.backward(loss, &mut grads, scale)?;
            }
            adam.step(&mut params, &mut grads)?;
        }

        let train_accuracy = if cfg.eval_train || cfg.stop_at_train_accuracy.is_some() {
            Some(accuracy(obj, &params, train)?)
        } else {
            None
        };
        let valid_accuracy = if valid.is_empty() {
            None
        } else {
            Some(accuracy(obj, &params, valid)?)
        };
        let log = EpochLog {
            epoch,
            mean_loss: loss_sum / train.len() as f64,
            running_accuracy: correct as f64 / train.len() as f64,
            train_accuracy,
            valid_accuracy,
        };
        log::info!(
            "epoch {epoch}: loss {:.4} running acc {:.4} train acc {} valid acc {}",
            log.mean_loss,
            log.running_accuracy,
            fmt_opt(log.train_accuracy),
            fmt_opt(log.valid_accuracy)
        );
        history.push(log);

        let score = valid_accuracy.unwrap_or(f64::INFINITY);
        if best
            .as_ref()
            .is_none_or(|(b, _, _)| score > *b || valid_accuracy.is_none())
        {
            best = Some((score, epoch, params.clone()));
        }
        if let (Some(target), Some(acc)) = (cfg.stop_at_train_accuracy, train_accuracy) {
            if acc >= target {
                break;
            }
        }
    }

    let (_, best_epoch, best) = best.unwrap_or((0.0, 0, params));
    Ok(TrainOutcome {
        best,
        best_epoch,
        history,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.4}"))
}
