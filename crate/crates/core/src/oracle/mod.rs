//! Oracles, safe-set computation and the memoizing query engine.

mod certify;

pub use certify::{
    check_coherence, check_completeness, check_soundness, Certifier, Counterexample, OracleReport, ViolationKind,
};

use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use crate::exec::{self, Exec};
use crate::kb::{KnowledgeBase, RuleSet, SequencePredicate, Verdict};
use crate::types::{Fact, TokenId, Vocabulary};

/// Boolean judge over (prefix, next token). Implementations must be pure.
pub trait Oracle: Send + Sync {
    fn judge(&self, prefix: &[TokenId], token: TokenId) -> bool;

    /// Judge with retrieved facts folded into the oracle's knowledge view.
    /// Oracles without a fact view ignore the overlay.
    fn judge_with(&self, overlay: &[Fact], prefix: &[TokenId], token: TokenId) -> bool {
        let _ = overlay;
        self.judge(prefix, token)
    }

    /// Judgment of a whole prefix: every step must pass [`Oracle::judge`].
    fn prefix_judge(&self, trace: &[TokenId]) -> bool {
        (0..trace.len()).all(|i| self.judge(&trace[..i], trace[i]))
    }

    /// Cheap structural pre-filter: a superset of the safe set computed
    /// without per-token judgments, or `None` when unavailable.
    fn candidates(&self, overlay: &[Fact], prefix: &[TokenId], vocab_len: usize) -> Option<Vec<TokenId>> {
        let _ = (overlay, prefix, vocab_len);
        None
    }
}

impl<O: Oracle + ?Sized> Oracle for &O {
    fn judge(&self, prefix: &[TokenId], token: TokenId) -> bool {
        (**self).judge(prefix, token)
    }
    fn judge_with(&self, overlay: &[Fact], prefix: &[TokenId], token: TokenId) -> bool {
        (**self).judge_with(overlay, prefix, token)
    }
    fn prefix_judge(&self, trace: &[TokenId]) -> bool {
        (**self).prefix_judge(trace)
    }
    fn candidates(&self, overlay: &[Fact], prefix: &[TokenId], vocab_len: usize) -> Option<Vec<TokenId>> {
        (**self).candidates(overlay, prefix, vocab_len)
    }
}

impl<O: Oracle + ?Sized> Oracle for Arc<O> {
    fn judge(&self, prefix: &[TokenId], token: TokenId) -> bool {
        (**self).judge(prefix, token)
    }
    fn judge_with(&self, overlay: &[Fact], prefix: &[TokenId], token: TokenId) -> bool {
        (**self).judge_with(overlay, prefix, token)
    }
    fn prefix_judge(&self, trace: &[TokenId]) -> bool {
        (**self).prefix_judge(trace)
    }
    fn candidates(&self, overlay: &[Fact], prefix: &[TokenId], vocab_len: usize) -> Option<Vec<TokenId>> {
        (**self).candidates(overlay, prefix, vocab_len)
    }
}

/// Accepts everything (`true`) or nothing (`false`).
#[derive(Debug, Clone, Copy)]
pub struct ConstOracle(pub bool);

impl Oracle for ConstOracle {
    fn judge(&self, _: &[TokenId], _: TokenId) -> bool {
        self.0
    }
}

/// Oracle from a closure.
pub struct FnOracle<F>(pub F);

impl<F> Oracle for FnOracle<F>
where
    F: Fn(&[TokenId], TokenId) -> bool + Send + Sync,
{
    fn judge(&self, prefix: &[TokenId], token: TokenId) -> bool {
        (self.0)(prefix, token)
    }
}

/// Explicit allow/deny table.
#[derive(Debug, Clone)]
pub struct RuleOracle(pub RuleSet);

impl Oracle for RuleOracle {
    fn judge(&self, prefix: &[TokenId], token: TokenId) -> bool {
        self.0.evaluate(prefix, token) == Verdict::Allow
    }

    fn candidates(&self, _: &[Fact], prefix: &[TokenId], vocab_len: usize) -> Option<Vec<TokenId>> {
        Some(self.0.allowed(prefix, vocab_len))
    }
}

/// Oracle derived from a knowledge base: `w` is safe after `x` iff the KB
/// admits `x ∥ w`. Sound and complete for that KB by construction.
#[derive(Debug, Clone)]
pub struct KbOracle {
    kb: Arc<KnowledgeBase>,
}

impl KbOracle {
    pub fn new(kb: Arc<KnowledgeBase>) -> Self {
        KbOracle { kb }
    }

    pub fn kb(&self) -> &KnowledgeBase {
        &self.kb
    }
}

impl Oracle for KbOracle {
    fn judge(&self, prefix: &[TokenId], token: TokenId) -> bool {
        self.judge_with(&[], prefix, token)
    }

    fn judge_with(&self, overlay: &[Fact], prefix: &[TokenId], token: TokenId) -> bool {
        let mut ext = Vec::with_capacity(prefix.len() + 1);
        ext.extend_from_slice(prefix);
        ext.push(token);
        self.kb.admits_with(overlay, &ext)
    }

    fn candidates(&self, _: &[Fact], prefix: &[TokenId], vocab_len: usize) -> Option<Vec<TokenId>> {
        match self.kb.predicate() {
            SequencePredicate::Rules(rules) => Some(rules.allowed(prefix, vocab_len)),
            SequencePredicate::AdmitAll => Some((0..vocab_len).map(TokenId::from).collect()),
            _ => None,
        }
    }
}

/// Wraps an oracle with an explicit whole-prefix judgment. Such oracles
/// must pass [`check_coherence`] before use.
pub struct WithPrefixJudge<O, F> {
    pub inner: O,
    pub prefix_judge: F,
}

impl<O, F> Oracle for WithPrefixJudge<O, F>
where
    O: Oracle,
    F: Fn(&[TokenId]) -> bool + Send + Sync,
{
    fn judge(&self, prefix: &[TokenId], token: TokenId) -> bool {
        self.inner.judge(prefix, token)
    }
    fn judge_with(&self, overlay: &[Fact], prefix: &[TokenId], token: TokenId) -> bool {
        self.inner.judge_with(overlay, prefix, token)
    }
    fn prefix_judge(&self, trace: &[TokenId]) -> bool {
        (self.prefix_judge)(trace)
    }
    fn candidates(&self, overlay: &[Fact], prefix: &[TokenId], vocab_len: usize) -> Option<Vec<TokenId>> {
        self.inner.candidates(overlay, prefix, vocab_len)
    }
}

/// Tokens `w` with `judge(prefix, w)`, in vocabulary order.
pub fn safe_set(oracle: &dyn Oracle, prefix: &[TokenId], vocab: &Vocabulary) -> Vec<TokenId> {
    safe_set_exec(oracle, prefix, vocab, Exec::default())
}

pub fn safe_set_exec(oracle: &dyn Oracle, prefix: &[TokenId], vocab: &Vocabulary, exec: Exec) -> Vec<TokenId> {
    exec::filter(exec, &vocab.ids(), |&w| oracle.judge(prefix, w))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SafeSetEval {
    pub safe: Vec<TokenId>,
    /// Full oracle evaluations spent (cache hits and pre-filtered tokens are free).
    pub queries: u64,
}

type MemoKey = (usize, Vec<TokenId>, TokenId);

/// Per-session safe-set evaluator.
///
/// With caching enabled, the oracle's structural pre-filter discards
/// tokens without a full judgment and a `(overlay size, prefix, token)`
/// memo answers repeated questions. The overlay only grows within a
/// session, so its length identifies the knowledge view.
pub struct SafeSetEngine<'a> {
    oracle: &'a dyn Oracle,
    vocab_ids: Vec<TokenId>,
    caching: bool,
    exec: Exec,
    memo: Mutex<HashMap<MemoKey, bool>>,
    total_queries: AtomicU64,
}

impl fmt::Debug for SafeSetEngine<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SafeSetEngine")
            .field("vocab_len", &self.vocab_ids.len())
            .field("caching", &self.caching)
            .field("exec", &self.exec)
            .finish()
    }
}

impl<'a> SafeSetEngine<'a> {
    pub fn new(oracle: &'a dyn Oracle, vocab_len: usize, caching: bool, exec: Exec) -> Self {
        SafeSetEngine {
            oracle,
            vocab_ids: (0..vocab_len).map(TokenId::from).collect(),
            caching,
            exec,
            memo: Mutex::new(HashMap::new()),
            total_queries: AtomicU64::new(0),
        }
    }

    pub fn total_queries(&self) -> u64 {
        self.total_queries.load(Ordering::Relaxed)
    }

    pub fn evaluate(&self, overlay: &[Fact], prefix: &[TokenId]) -> SafeSetEval {
        let queries = AtomicU64::new(0);
        let safe = if self.caching {
            let candidates = self
                .oracle
                .candidates(overlay, prefix, self.vocab_ids.len())
                .unwrap_or_else(|| self.vocab_ids.clone());
            exec::filter(self.exec, &candidates, |&w| {
                let key = (overlay.len(), prefix.to_vec(), w);
                if let Some(&hit) = self.memo.lock().expect("memo poisoned").get(&key) {
                    return hit;
                }
                queries.fetch_add(1, Ordering::Relaxed);
                let verdict = self.oracle.judge_with(overlay, prefix, w);
                // Concurrent inserts of the same key carry the same verdict.
                self.memo.lock().expect("memo poisoned").insert(key, verdict);
                verdict
            })
        } else {
            queries.store(self.vocab_ids.len() as u64, Ordering::Relaxed);
            exec::filter(self.exec, &self.vocab_ids, |&w| self.oracle.judge_with(overlay, prefix, w))
        };
        let queries = queries.into_inner();
        self.total_queries.fetch_add(queries, Ordering::Relaxed);
        SafeSetEval { safe, queries }
    }
}
