//! Brute-force soundness and completeness certificates.
//!
//! Every knowledge-consistent prefix up to the length bound is extended by
//! every token and the oracle's verdict is compared with the knowledge
//! base. Sound: no accepted extension leaves the KB. Complete: no
//! extension inside the KB is rejected.

use serde::Serialize;

use super::Oracle;
use crate::decoder::{enumerate_truthful_exec, EnumBudget};
use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::kb::KnowledgeBase;
use crate::types::{TokenId, Trace, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// Accepted although `prefix ∥ token` is not knowledge-consistent.
    Unsound,
    /// Rejected although `prefix ∥ token` is knowledge-consistent.
    Incomplete,
    /// `prefix_judge` disagrees with `judge` on a coherent prefix.
    Incoherent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Counterexample {
    pub prefix: Trace,
    pub token: TokenId,
    pub kind: ViolationKind,
}

/// `None` for a property that was not checked.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OracleReport {
    pub sound: Option<bool>,
    pub complete: Option<bool>,
    pub prefixes_checked: usize,
    pub counterexamples: Vec<Counterexample>,
}

impl OracleReport {
    pub fn violations(&self, kind: ViolationKind) -> impl Iterator<Item = &Counterexample> {
        self.counterexamples.iter().filter(move |c| c.kind == kind)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Certifier {
    pub budget: EnumBudget,
    pub exec: Exec,
}

impl Certifier {
    pub fn soundness(&self, oracle: &dyn Oracle, kb: &KnowledgeBase, vocab: &Vocabulary, max_len: usize) -> Result<OracleReport> {
        self.run(oracle, kb, vocab, max_len, true, false)
    }

    pub fn completeness(&self, oracle: &dyn Oracle, kb: &KnowledgeBase, vocab: &Vocabulary, max_len: usize) -> Result<OracleReport> {
        self.run(oracle, kb, vocab, max_len, false, true)
    }

    /// Both checks over one enumeration.
    pub fn certify(&self, oracle: &dyn Oracle, kb: &KnowledgeBase, vocab: &Vocabulary, max_len: usize) -> Result<OracleReport> {
        self.run(oracle, kb, vocab, max_len, true, true)
    }

    fn run(
        &self,
        oracle: &dyn Oracle,
        kb: &KnowledgeBase,
        vocab: &Vocabulary,
        max_len: usize,
        sound: bool,
        complete: bool,
    ) -> Result<OracleReport> {
        if max_len == 0 {
            return Err(Error::validation("max_len", "must be at least 1"));
        }
        self.budget.check(vocab.len(), max_len)?;
        // Prefixes one shorter than the bound; their extensions reach it.
        let prefixes = enumerate_truthful_exec(kb, vocab, max_len - 1, self.budget, self.exec)?;
        let ids = vocab.ids();
        let per_prefix = exec::map(self.exec, &prefixes, |p| {
            let mut found = Vec::new();
            let mut ext = p.as_slice().to_vec();
            for &w in &ids {
                ext.push(w);
                let accepted = oracle.judge(p, w);
                let truthful = kb.admits(&ext);
                ext.pop();
                let kind = match (accepted, truthful) {
                    (true, false) if sound => ViolationKind::Unsound,
                    (false, true) if complete => ViolationKind::Incomplete,
                    _ => continue,
                };
                found.push(Counterexample {
                    prefix: p.clone(),
                    token: w,
                    kind,
                });
            }
            found
        });
        let counterexamples: Vec<Counterexample> = per_prefix.into_iter().flatten().collect();
        let has = |k| counterexamples.iter().any(|c| c.kind == k);
        Ok(OracleReport {
            sound: sound.then(|| !has(ViolationKind::Unsound)),
            complete: complete.then(|| !has(ViolationKind::Incomplete)),
            prefixes_checked: prefixes.len(),
            counterexamples,
        })
    }
}

pub fn check_soundness(oracle: &dyn Oracle, kb: &KnowledgeBase, vocab: &Vocabulary, max_len: usize) -> Result<OracleReport> {
    Certifier::default().soundness(oracle, kb, vocab, max_len)
}

pub fn check_completeness(oracle: &dyn Oracle, kb: &KnowledgeBase, vocab: &Vocabulary, max_len: usize) -> Result<OracleReport> {
    Certifier::default().completeness(oracle, kb, vocab, max_len)
}

/// Pairs `(x, w)` where `prefix_judge(x)` holds but `prefix_judge(x ∥ w)`
/// disagrees with `judge(x, w)`, over all sequences shorter than `max_len`.
pub fn check_coherence(oracle: &dyn Oracle, vocab: &Vocabulary, max_len: usize, budget: EnumBudget) -> Result<Vec<Counterexample>> {
    if max_len == 0 {
        return Err(Error::validation("max_len", "must be at least 1"));
    }
    budget.check(vocab.len(), max_len)?;
    let mut frontier = vec![Trace::new()];
    let mut found = Vec::new();
    for _ in 0..max_len {
        let mut next = Vec::new();
        for x in &frontier {
            if !oracle.prefix_judge(x) {
                continue;
            }
            for w in vocab.ids() {
                let ext = x.extended(w);
                if oracle.prefix_judge(&ext) != oracle.judge(x, w) {
                    found.push(Counterexample {
                        prefix: x.clone(),
                        token: w,
                        kind: ViolationKind::Incoherent,
                    });
                }
                next.push(ext);
            }
        }
        frontier = next;
    }
    Ok(found)
}
