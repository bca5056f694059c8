//! Evaluation reports and the paired significance test.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::aggregator::Ablation;
use crate::config::RunConfig;
use crate::data::{Label, Split};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Nsnet,
    Ensemble,
    /// The entailment network on the whole hypothesis.
    NeuralBase,
    /// The entailment network averaged over sub-facts.
    NeuralDecomposed,
    Majority,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Nsnet => "nsnet",
            ModelKind::Ensemble => "ensemble",
            ModelKind::NeuralBase => "neural_base",
            ModelKind::NeuralDecomposed => "neural_decomposed",
            ModelKind::Majority => "majority",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nsnet" => Ok(ModelKind::Nsnet),
            "ensemble" => Ok(ModelKind::Ensemble),
            "neural_base" => Ok(ModelKind::NeuralBase),
            "neural_decomposed" => Ok(ModelKind::NeuralDecomposed),
            "majority" => Ok(ModelKind::Majority),
            other => Err(Error::Config(format!("unknown model {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub gold: Label,
    pub predicted: Label,
    pub prob_entail: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub baseline: String,
    pub baseline_accuracy: f64,
    /// `accuracy - baseline_accuracy`.
    pub delta: f64,
    /// Examples this model gets right and the baseline gets wrong.
    pub b: usize,
    /// Examples the baseline gets right and this model gets wrong.
    pub c: usize,
    pub p_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: ModelKind,
    pub split: Split,
    pub ablation: Ablation,
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub predictions: Vec<Prediction>,
    pub comparison: Option<Comparison>,
    pub config: RunConfig,
}

impl EvalReport {
    pub fn new(
        model: ModelKind,
        split: Split,
        ablation: Ablation,
        predictions: Vec<Prediction>,
        config: RunConfig,
    ) -> Self {
        let correct = predictions.iter().filter(|p| p.gold == p.predicted).count();
        let total = predictions.len();
        EvalReport {
            model,
            split,
            ablation,
            total,
            correct,
            accuracy: ratio(correct, total),
            predictions,
            comparison: None,
            config,
        }
    }

    /// Accuracy recomputed from the stored predictions.
    pub fn recomputed_accuracy(&self) -> f64 {
        ratio(
            self.predictions
                .iter()
                .filter(|p| p.gold == p.predicted)
                .count(),
            self.predictions.len(),
        )
    }

    /// Short tag used for file names, e.g. `nsnet-test-no-matcher`.
    pub fn tag(&self) -> String {
        let mut tag = format!("{}-{}", self.model.name(), self.split);
        match (self.ablation.disable_matcher, self.ablation.disable_lookup) {
            (true, true) => tag.push_str("-no-symbolic"),
            (true, false) => tag.push_str("-no-matcher"),
            (false, true) => tag.push_str("-no-lookup"),
            (false, false) => {}
        }
        tag
    }

    /// Pairs this report with `baseline` on the same examples.
    pub fn compare_with(&mut self, baseline: &EvalReport) -> Result<()> {
        if self.predictions.len() != baseline.predictions.len()
            || self
                .predictions
                .iter()
                .zip(&baseline.predictions)
                .any(|(a, b)| a.id != b.id)
        {
            return Err(Error::Contract(
                "baseline report covers different examples".into(),
            ));
        }
        let gold: Vec<Label> = self.predictions.iter().map(|p| p.gold).collect();
        let ours: Vec<Label> = self.predictions.iter().map(|p| p.predicted).collect();
        let theirs: Vec<Label> = baseline.predictions.iter().map(|p| p.predicted).collect();
        let (b, c) = discordant(&ours, &theirs, &gold)?;
        self.comparison = Some(Comparison {
            baseline: baseline.tag(),
            baseline_accuracy: baseline.accuracy,
            delta: self.accuracy - baseline.accuracy,
            b,
            c,
            p_value: mcnemar_exact(b, c),
        });
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "model      {}", self.model.name());
        let _ = writeln!(s, "split      {}", self.split);
        let _ = writeln!(
            s,
            "ablation   matcher={} lookup={}",
            if self.ablation.disable_matcher {
                "off"
            } else {
                "on"
            },
            if self.ablation.disable_lookup {
                "off"
            } else {
                "on"
            }
        );
        let _ = writeln!(
            s,
            "accuracy   {:.4} ({}/{})",
            self.accuracy, self.correct, self.total
        );
        if let Some(c) = &self.comparison {
            let _ = writeln!(
                s,
                "baseline   {} accuracy {:.4} delta {:+.4} discordant b={} c={} p={:.6}",
                c.baseline, c.baseline_accuracy, c.delta, c.b, c.c, c.p_value
            );
        }
        let _ = writeln!(s, "seed       {}", self.config.seed);
        s.push('\n');
        for p in &self.predictions {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{:.6}",
                p.id, p.gold, p.predicted, p.prob_entail
            );
        }
        s
    }

    /// Writes `{dir}/{tag}.txt` and `{dir}/{tag}.json`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let tag = self.tag();
        fs::write(dir.join(format!("{tag}.txt")), self.to_text())?;
        fs::write(
            dir.join(format!("{tag}.json")),
            serde_json::to_string_pretty(self)?,
        )?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read report {}: {e}", path.display())))?;
        Ok(serde_json::from_str(&s)?)
    }
}

fn ratio(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        n as f64 / d as f64
    }
}

/// Counts `(b, c)`: pairs where only `a` is right and where only `b` is right.
pub fn discordant(preds_a: &[Label], preds_b: &[Label], gold: &[Label]) -> Result<(usize, usize)> {
    if preds_a.len() != gold.len() || preds_b.len() != gold.len() {
        return Err(Error::Contract(format!(
            "prediction lengths {} and {} do not match {} gold labels",
            preds_a.len(),
            preds_b.len(),
            gold.len()
        )));
    }
    let mut b = 0;
    let mut c = 0;
    for ((x, y), g) in preds_a.iter().zip(preds_b).zip(gold) {
        match (x == g, y == g) {
            (true, false) => b += 1,
            (false, true) => c += 1,
            _ => {}
        }
    }
    Ok((b, c))
}

/// Exact two-sided McNemar test on aligned predictions.
pub fn mcnemar_test(preds_a: &[Label], preds_b: &[Label], gold: &[Label]) -> Result<f64> {
    let (b, c) = discordant(preds_a, preds_b, gold)?;
    Ok(mcnemar_exact(b, c))
}

/// `min(1, 2 · P[X ≤ min(b, c)])` for `X ~ Binomial(b + c, 1/2)`.
pub fn mcnemar_exact(b: usize, c: usize) -> f64 {
    let n = b + c;
    if n == 0 {
        return 1.0;
    }
    let k = b.min(c);
    let mut tail = 0.0;
    if n <= 1000 {
        // Direct products stay exact for the small cases that matter most.
        let mut term = 0.5f64.powi(n as i32);
        for i in 0..=k {
            if i > 0 {
                term = term * (n - i + 1) as f64 / i as f64;
            }
            tail += term;
        }
    } else {
        let ln_half_n = n as f64 * 0.5f64.ln();
        let mut ln_choose = 0.0;
        for i in 0..=k {
            if i > 0 {
                ln_choose += ((n - i + 1) as f64).ln() - (i as f64).ln();
            }
            tail += (ln_choose + ln_half_n).exp();
        }
    }
    (2.0 * tail).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(bits: &[u8]) -> Vec<Label> {
        bits.iter()
            .map(|&b| Label::from_index(b as usize))
            .collect()
    }

    #[test]
    fn identical_predictions_give_one() {
        let p = labels(&[1, 0, 1, 1]);
        assert_eq!(mcnemar_test(&p, &p, &labels(&[1, 1, 0, 1])).unwrap(), 1.0);
    }

    #[test]
    fn hand_computed_tails() {
        assert_eq!(mcnemar_exact(10, 0), 2.0 / 1024.0);
        assert_eq!(mcnemar_exact(0, 10), 2.0 / 1024.0);
        assert_eq!(mcnemar_exact(1, 1), 1.0);
        // n = 6, k = 1: 2 * (1 + 6) / 64
        assert!((mcnemar_exact(5, 1) - 14.0 / 64.0).abs() < 1e-15);
    }

    #[test]
    fn length_mismatch_is_a_contract_violation() {
        let err = mcnemar_test(&labels(&[1]), &labels(&[1, 0]), &labels(&[1, 0])).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn report_accuracy_is_recomputable() {
        let preds = vec![
            Prediction {
                id: "t-0".into(),
                gold: Label::Entails,
                predicted: Label::Entails,
                prob_entail: 0.9,
            },
            Prediction {
                id: "t-1".into(),
                gold: Label::Neutral,
                predicted: Label::Entails,
                prob_entail: 0.6,
            },
        ];
        let r = EvalReport::new(
            ModelKind::Nsnet,
            Split::Test,
            Ablation::BOTH,
            preds,
            RunConfig::default(),
        );
        assert_eq!(r.accuracy, 0.5);
        assert_eq!(r.recomputed_accuracy(), r.accuracy);
        assert_eq!(r.tag(), "nsnet-test-no-symbolic");
        let back: EvalReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
    }

    proptest! {
        #[test]
        fn p_value_is_a_probability_and_symmetric(b in 0usize..1500, c in 0usize..1500) {
            let p = mcnemar_exact(b, c);
            prop_assert!((0.0..=1.0).contains(&p));
            prop_assert_eq!(p, mcnemar_exact(c, b));
        }
    }
}
