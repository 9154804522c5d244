//! Table-driven scoring model `P(w | prefix)`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{TokenId, Vocabulary};

const NORMALIZATION_TOL: f64 = 1e-9;

/// Which feature of the prefix selects the score vector.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextKind {
    /// The whole prefix.
    #[default]
    Exact,
    /// Only the last token (empty for the empty prefix).
    Last,
    /// The set of distinct tokens in the prefix.
    Set,
}

impl ContextKind {
    pub fn key(self, prefix: &[TokenId]) -> Vec<TokenId> {
        match self {
            ContextKind::Exact => prefix.to_vec(),
            ContextKind::Last => prefix.last().copied().into_iter().collect(),
            ContextKind::Set => {
                let mut k = prefix.to_vec();
                k.sort_unstable();
                k.dedup();
                k
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoringModel {
    vocab: Vocabulary,
    kind: ContextKind,
    contexts: BTreeMap<Vec<TokenId>, Vec<f64>>,
    fallback: Option<Vec<f64>>,
    normalized: bool,
}

impl ScoringModel {
    /// Build a model; vectors are indexed by token id.
    pub fn new(
        vocab: Vocabulary,
        kind: ContextKind,
        contexts: impl IntoIterator<Item = (Vec<TokenId>, Vec<f64>)>,
        fallback: Option<Vec<f64>>,
        normalized: bool,
    ) -> Result<Self> {
        let mut table = BTreeMap::new();
        for (key, probs) in contexts {
            let key = kind.key(&key);
            check_vector(&vocab, &probs, normalized, &format!("context {:?}", vocab.render(&key)))?;
            table.insert(key, probs);
        }
        if let Some(fb) = &fallback {
            check_vector(&vocab, fb, normalized, "fallback")?;
        }
        Ok(ScoringModel {
            vocab,
            kind,
            contexts: table,
            fallback,
            normalized,
        })
    }

    /// Same vector for every prefix.
    pub fn constant(vocab: Vocabulary, probs: Vec<f64>, normalized: bool) -> Result<Self> {
        ScoringModel::new(vocab, ContextKind::Exact, [], Some(probs), normalized)
    }

    pub fn uniform(vocab: Vocabulary) -> Result<Self> {
        let n = vocab.len();
        ScoringModel::constant(vocab, vec![1.0 / n as f64; n], true)
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn kind(&self) -> ContextKind {
        self.kind
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn contexts(&self) -> &BTreeMap<Vec<TokenId>, Vec<f64>> {
        &self.contexts
    }

    pub fn fallback(&self) -> Option<&[f64]> {
        self.fallback.as_deref()
    }

    /// Score vector for the context of `prefix`.
    pub fn distribution(&self, prefix: &[TokenId]) -> Result<&[f64]> {
        let key = self.kind.key(prefix);
        self.contexts
            .get(&key)
            .or(self.fallback.as_ref())
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UndefinedContext(format!("{:?}", self.vocab.render(&key))))
    }

    pub fn prob(&self, prefix: &[TokenId], w: TokenId) -> Result<f64> {
        if !self.vocab.contains(w) {
            return Err(Error::UnknownToken(w.to_string()));
        }
        Ok(self.distribution(prefix)?[w.index()])
    }

    /// Chain-rule product of step probabilities; 1 for the empty trace.
    pub fn sequence_prob(&self, trace: &[TokenId]) -> Result<f64> {
        (0..trace.len()).try_fold(1.0, |acc, i| Ok(acc * self.prob(&trace[..i], trace[i])?))
    }

    /// Natural-log sequence probability, for traces long enough to underflow.
    pub fn sequence_log_prob(&self, trace: &[TokenId]) -> Result<f64> {
        (0..trace.len()).try_fold(0.0, |acc, i| Ok(acc + self.prob(&trace[..i], trace[i])?.ln()))
    }
}

fn check_vector(vocab: &Vocabulary, probs: &[f64], normalized: bool, field: &str) -> Result<()> {
    if probs.len() != vocab.len() {
        return Err(Error::validation(
            field,
            format!("vector has {} entries, vocabulary has {}", probs.len(), vocab.len()),
        ));
    }
    if let Some(bad) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(Error::validation(field, format!("score {bad} is negative or not finite")));
    }
    if normalized {
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::validation(field, format!("probabilities sum to {sum}, expected 1")));
        }
        if probs.iter().any(|&p| p > 1.0) {
            return Err(Error::validation(field, "probability above 1"));
        }
    }
    Ok(())
}

/// One row of a model document: surfaces of the key and sparse scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextSpec {
    pub key: Vec<String>,
    pub probs: BTreeMap<String, f64>,
}

/// On-disk model document. Surfaces missing from `probs` score 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default)]
    pub context: ContextKind,
    #[serde(default = "yes")]
    pub normalized: bool,
    #[serde(default)]
    pub contexts: Vec<ContextSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback: Option<BTreeMap<String, f64>>,
}

fn yes() -> bool {
    true
}

impl ModelSpec {
    pub fn build(&self, vocab: &Vocabulary) -> Result<ScoringModel> {
        let dense = |probs: &BTreeMap<String, f64>, field: &str| -> Result<Vec<f64>> {
            let mut v = vec![0.0; vocab.len()];
            for (surface, &p) in probs {
                let id = vocab
                    .id(surface)
                    .map_err(|e| Error::validation(field.to_string(), e.to_string()))?;
                v[id.index()] = p;
            }
            Ok(v)
        };
        let contexts = self
            .contexts
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let field = format!("model.contexts[{i}]");
                let key = vocab
                    .trace(&c.key)
                    .map_err(|e| Error::validation(format!("{field}.key"), e.to_string()))?;
                Ok((key.into_vec(), dense(&c.probs, &format!("{field}.probs"))?))
            })
            .collect::<Result<Vec<_>>>()?;
        let fallback = self
            .fallback
            .as_ref()
            .map(|fb| dense(fb, "model.fallback"))
            .transpose()?;
        ScoringModel::new(vocab.clone(), self.context, contexts, fallback, self.normalized)
    }
}
