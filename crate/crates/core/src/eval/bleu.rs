//! Sentence-level BLEU: clipped modified n-gram precision, geometric
//! mean under configurable weights, brevity penalty against the closest
//! reference length.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothing {
    /// Any zero precision zeroes the whole score.
    None,
    /// Zero numerators are replaced by 0.1 before dividing.
    Epsilon,
    /// Numerator and denominator of every order get +1.
    AddOneCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleuConfig {
    pub max_n: usize,
    /// One weight per n-gram order, summing to 1.
    pub weights: Vec<f64>,
    pub smoothing: Smoothing,
}

impl Default for BleuConfig {
    fn default() -> Self {
        BleuConfig::uniform(4, Smoothing::None)
    }
}

impl BleuConfig {
    pub fn uniform(max_n: usize, smoothing: Smoothing) -> Self {
        BleuConfig {
            max_n,
            weights: vec![1.0 / max_n as f64; max_n],
            smoothing,
        }
    }

    fn validate(&self) -> Result<(), EvalError> {
        if self.max_n == 0 || self.weights.len() != self.max_n {
            return Err(EvalError::InvalidConfig(format!(
                "max_n {} with {} weights",
                self.max_n,
                self.weights.len()
            )));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(EvalError::InvalidConfig(format!("weights sum to {sum}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleuScore {
    pub score: f64,
    pub precisions: Vec<f64>,
    pub brevity_penalty: f64,
    pub hyp_len: usize,
    pub ref_len: usize,
}

fn ngram_counts<'a, T: AsRef<str>>(tokens: &'a [T], n: usize) -> HashMap<Vec<&'a str>, usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for window in tokens.windows(n) {
            let key: Vec<&str> = window.iter().map(AsRef::as_ref).collect();
            *counts.entry(key).or_insert(0) += 1;
        }
    }
    counts
}

/// Score one hypothesis against one or more references.
pub fn sentence_bleu<T: AsRef<str>>(
    references: &[&[T]],
    hypothesis: &[T],
    config: &BleuConfig,
) -> Result<BleuScore, EvalError> {
    config.validate()?;
    if hypothesis.is_empty() {
        return Err(EvalError::EmptyHypothesis);
    }
    if references.is_empty() || references.iter().any(|r| r.is_empty()) {
        return Err(EvalError::EmptyReference);
    }

    let hyp_len = hypothesis.len();
    // Closest reference length; ties break toward the shorter reference.
    let ref_len = references
        .iter()
        .map(|r| r.len())
        .min_by_key(|&l| (l.abs_diff(hyp_len), l))
        .expect("non-empty references");

    let mut precisions = Vec::with_capacity(config.max_n);
    for n in 1..=config.max_n {
        let hyp_counts = ngram_counts(hypothesis, n);
        let mut max_ref: HashMap<Vec<&str>, usize> = HashMap::new();
        for r in references {
            for (gram, count) in ngram_counts(*r, n) {
                let e = max_ref.entry(gram).or_insert(0);
                *e = (*e).max(count);
            }
        }
        let clipped: usize = hyp_counts
            .iter()
            .map(|(gram, &c)| c.min(max_ref.get(gram).copied().unwrap_or(0)))
            .sum();
        let total: usize = hyp_counts.values().sum();
        let p = match config.smoothing {
            Smoothing::None => {
                if total == 0 {
                    0.0
                } else {
                    clipped as f64 / total as f64
                }
            }
            Smoothing::Epsilon => {
                if total == 0 {
                    0.0
                } else if clipped == 0 {
                    0.1 / total as f64
                } else {
                    clipped as f64 / total as f64
                }
            }
            Smoothing::AddOneCounts => (clipped + 1) as f64 / (total + 1) as f64,
        };
        precisions.push(p);
    }

    let brevity_penalty = if hyp_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };

    let score = if precisions.iter().any(|&p| p <= 0.0) {
        0.0
    } else {
        let log_mean: f64 = precisions
            .iter()
            .zip(&config.weights)
            .map(|(&p, &w)| w * p.ln())
            .sum();
        brevity_penalty * log_mean.exp()
    };

    Ok(BleuScore {
        score,
        precisions,
        brevity_penalty,
        hyp_len,
        ref_len,
    })
}
