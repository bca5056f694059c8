//! Training-free ensemble: per-sub-fact probabilistic OR (or AND) of the
//! neural, matcher and lookup scores, averaged over sub-facts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CombineMode {
    /// `1 - (1-n)(1-m)(1-l)`
    #[default]
    Or,
    /// `n * m * l`
    And,
}

impl std::str::FromStr for CombineMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "or" => Ok(CombineMode::Or),
            "and" => Ok(CombineMode::And),
            _ => Err(Error::Config(format!("unknown ensemble mode {s:?}"))),
        }
    }
}

/// The three per-sub-fact module scores.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactScores {
    pub n: f64,
    pub m: f64,
    pub l: f64,
}

pub fn combine_fact(n: f64, m: f64, l: f64, mode: CombineMode) -> Result<f64> {
    for (name, v) in [("n", n), ("m", m), ("l", l)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Contract(format!("{name} = {v} outside [0, 1]")));
        }
    }
    Ok(match mode {
        // accumulated as p + x(1 - p) so a zero input leaves p untouched and
        // any input of 1 yields exactly 1
        CombineMode::Or => [m, l].iter().fold(n, |p, x| p + x * (1.0 - p)),
        CombineMode::And => n * m * l,
    })
}

/// Mean combined probability; entails iff strictly above `threshold`.
pub fn ensemble_predict(
    facts: &[FactScores],
    mode: CombineMode,
    threshold: f64,
) -> Result<(bool, f64)> {
    if facts.is_empty() {
        return Err(Error::Contract("ensemble over zero sub-facts".into()));
    }
    let mut sum = 0.0;
    for f in facts {
        sum += combine_fact(f.n, f.m, f.l, mode)?;
    }
    let prob = sum / facts.len() as f64;
    Ok((prob > threshold, prob))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(n: f64, m: f64, l: f64) -> FactScores {
        FactScores { n, m, l }
    }

    #[test]
    fn or_identities() {
        assert_eq!(combine_fact(0.5, 0.0, 0.0, CombineMode::Or).unwrap(), 0.5);
        assert_eq!(combine_fact(0.3, 0.0, 0.0, CombineMode::Or).unwrap(), 0.3);
        assert_eq!(combine_fact(0.3, 1.0, 0.0, CombineMode::Or).unwrap(), 1.0);
        assert_eq!(combine_fact(1.0, 0.2, 0.4, CombineMode::Or).unwrap(), 1.0);
        assert_eq!(
            combine_fact(0.5, 0.5, 0.5, CombineMode::And).unwrap(),
            0.125
        );
    }

    #[test]
    fn out_of_range_is_rejected() {
        assert!(combine_fact(1.2, 0.0, 0.0, CombineMode::Or).is_err());
        assert!(combine_fact(0.2, -0.1, 0.0, CombineMode::Or).is_err());
        assert!(ensemble_predict(&[], CombineMode::Or, 0.5).is_err());
    }

    #[test]
    fn averaging_and_threshold() {
        let (label, p) = ensemble_predict(&[s(0.2, 0.0, 0.0); 3], CombineMode::Or, 0.5).unwrap();
        assert!(!label);
        assert!((p - 0.2).abs() < 1e-12);
        let (label, p) =
            ensemble_predict(&[s(0.5, 0.0, 0.0), s(0.0, 0.5, 0.0)], CombineMode::Or, 0.5).unwrap();
        assert_eq!(p, 0.5);
        assert!(!label, "ties resolve to not-entails");
    }

    fn unit() -> impl Strategy<Value = f64> {
        0.0..=1.0f64
    }

    proptest! {
        #[test]
        fn or_and_bounds(n in unit(), m in unit(), l in unit()) {
            let or = combine_fact(n, m, l, CombineMode::Or).unwrap();
            let and = combine_fact(n, m, l, CombineMode::And).unwrap();
            prop_assert!(or >= n.max(m).max(l) - 1e-12);
            prop_assert!(and <= n.min(m).min(l) + 1e-12);
            prop_assert!((or - combine_fact(l, n, m, CombineMode::Or).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn or_monotone(n in unit(), m in unit(), l in unit(), d in unit()) {
            let n2 = (n + d).min(1.0);
            prop_assert!(combine_fact(n2, m, l, CombineMode::Or).unwrap() >= combine_fact(n, m, l, CombineMode::Or).unwrap() - 1e-12);
        }

        #[test]
        fn order_invariant(v in proptest::collection::vec((unit(), unit(), unit()), 1..6)) {
            let facts: Vec<FactScores> = v.iter().map(|&(n, m, l)| s(n, m, l)).collect();
            let mut rev = facts.clone();
            rev.reverse();
            let a = ensemble_predict(&facts, CombineMode::Or, 0.5).unwrap();
            let b = ensemble_predict(&rev, CombineMode::Or, 0.5).unwrap();
            prop_assert!((a.1 - b.1).abs() < 1e-12);
        }
    }
}
